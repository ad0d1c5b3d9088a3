//! Dense density matrices for small registers: materialisation of symbolic
//! states, partial traces, von Neumann entropies and classical-quantum
//! ensemble quantities.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use petgraph::unionfind::UnionFind;
use thiserror::Error;

use crate::gf::digit_dot;
use crate::qsym::{QsymError, SlotContent, SymbolicState};

/// Largest total dimension we are willing to materialise.
pub const MAX_DIM: usize = 1 << 12;

/// Eigenvalues below this are treated as exact zeros.
pub const EIGEN_CLAMP: f64 = 1e-12;

/// Tolerance for validity checks on density matrices.
pub const VALIDITY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DensimError {
    #[error("total dimension {dim} exceeds the cap {max}", max = MAX_DIM)]
    DimensionCap { dim: usize },
    #[error("subsystem index {0} out of range")]
    BadSubsystem(usize),
    #[error("slot {0} appears twice in the subset")]
    RepeatedSlot(String),
    #[error("slot {0} is erased and has no state")]
    ErasedSlot(String),
    #[error("ensemble members have different subsystem layouts")]
    LayoutMismatch,
    #[error("ensemble is empty or its weights do not sum to one")]
    BadWeights,
    #[error("matrix is not a density matrix: {0}")]
    Invalid(String),
    #[error(transparent)]
    Qsym(#[from] QsymError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dims: Vec<usize>,
    mat: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// Wraps a matrix after checking Hermiticity, trace and positivity.
    pub fn new(dims: Vec<usize>, mat: DMatrix<Complex64>) -> Result<Self, DensimError> {
        let rho = DensityMatrix { dims, mat };
        rho.validate()?;
        Ok(rho)
    }

    /// The 1×1 state of the empty system.
    pub fn trivial() -> Self {
        DensityMatrix { dims: Vec::new(), mat: DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0)) }
    }

    pub fn maximally_mixed(dims: Vec<usize>) -> Self {
        let d: usize = dims.iter().product();
        let mat = DMatrix::from_diagonal_element(d, d, Complex64::new(1.0 / d as f64, 0.0));
        DensityMatrix { dims, mat }
    }

    /// `|v⟩⟨v|` for a normalised vector.
    pub fn pure(dims: Vec<usize>, v: &[Complex64]) -> Self {
        let d = v.len();
        let mat = DMatrix::from_fn(d, d, |i, j| v[i] * v[j].conj());
        DensityMatrix { dims, mat }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    pub fn validate(&self) -> Result<(), DensimError> {
        let d: usize = self.dims.iter().product();
        if self.mat.nrows() != d || self.mat.ncols() != d {
            return Err(DensimError::Invalid(format!(
                "shape {}x{} vs dims {:?}",
                self.mat.nrows(),
                self.mat.ncols(),
                self.dims
            )));
        }
        let tr = self.mat.trace();
        if (tr.re - 1.0).abs() > VALIDITY_TOL || tr.im.abs() > VALIDITY_TOL {
            return Err(DensimError::Invalid(format!("trace {tr}")));
        }
        let herm = (&self.mat - self.mat.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm > VALIDITY_TOL {
            return Err(DensimError::Invalid(format!("anti-Hermitian part {herm:e}")));
        }
        // ρ + εI is positive definite iff every eigenvalue of ρ exceeds -ε
        let shifted = &self.mat + DMatrix::identity(d, d) * Complex64::new(VALIDITY_TOL, 0.0);
        if shifted.cholesky().is_none() {
            let min = self.eigenvalues().into_iter().reduce(f64::min).unwrap_or(f64::NAN);
            return Err(DensimError::Invalid(format!("not positive semidefinite (smallest eigenvalue {min:e})")));
        }
        Ok(())
    }

    /// Weighted sum `Σ w_i ρ_i`; layouts must agree.
    pub fn mix(parts: &[(f64, &DensityMatrix)]) -> Result<Self, DensimError> {
        let (_, first) = parts.first().ok_or(DensimError::BadWeights)?;
        let mut mat = DMatrix::zeros(first.dim(), first.dim());
        for (w, rho) in parts {
            if rho.dims != first.dims {
                return Err(DensimError::LayoutMismatch);
            }
            mat += &rho.mat * Complex64::new(*w, 0.0);
        }
        Ok(DensityMatrix { dims: first.dims.clone(), mat })
    }

    pub fn kron(&self, other: &DensityMatrix) -> DensityMatrix {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        DensityMatrix { dims, mat: self.mat.kronecker(&other.mat) }
    }

    /// Keeps the listed subsystems (in their original order) and traces out the rest.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix, DensimError> {
        let nsys = self.dims.len();
        if let Some(&bad) = keep.iter().find(|&&k| k >= nsys) {
            return Err(DensimError::BadSubsystem(bad));
        }
        let mut kept = vec![false; nsys];
        for &k in keep {
            kept[k] = true;
        }
        if kept.iter().all(|&k| k) {
            return Ok(self.clone());
        }
        let strides = strides(&self.dims);
        let keep_sys: Vec<usize> = (0..nsys).filter(|&s| kept[s]).collect();
        let trace_sys: Vec<usize> = (0..nsys).filter(|&s| !kept[s]).collect();
        let offsets = |sys: &[usize]| -> Vec<usize> {
            let mut out = vec![0usize];
            for &s in sys {
                out = out
                    .iter()
                    .flat_map(|&base| {
                        let stride = strides[s];
                        (0..self.dims[s]).map(move |i| base + i * stride)
                    })
                    .collect();
            }
            out
        };
        let keep_off = offsets(&keep_sys);
        let trace_off = offsets(&trace_sys);
        let dk = keep_off.len();
        let mut mat = DMatrix::zeros(dk, dk);
        for (a, &oa) in keep_off.iter().enumerate() {
            for (b, &ob) in keep_off.iter().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for &t in &trace_off {
                    acc += self.mat[(oa + t, ob + t)];
                }
                mat[(a, b)] = acc;
            }
        }
        let dims = keep_sys.iter().map(|&s| self.dims[s]).collect();
        Ok(DensityMatrix { dims, mat })
    }

    /// Eigenvalues of the Hermitian matrix, ascending order not guaranteed.
    ///
    /// The matrix is split into the connected components of its nonzero
    /// pattern and each block is diagonalised on its own; averaged stabilizer
    /// ensembles are sparse and fall apart into many small blocks.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let d = self.dim();
        let zero = Complex64::new(0.0, 0.0);
        let mut components = UnionFind::<usize>::new(d);
        for j in 0..d {
            for i in 0..j {
                if self.mat[(i, j)] != zero {
                    components.union(i, j);
                }
            }
        }
        let mut blocks: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..d {
            blocks.entry(components.find(i)).or_default().push(i);
        }
        let mut out = Vec::with_capacity(d);
        for idx in blocks.values() {
            if let [i] = idx[..] {
                out.push(self.mat[(i, i)].re);
            } else {
                out.extend(dense_spectrum(self.mat.select_rows(idx).select_columns(idx)));
            }
        }
        out
    }

    /// Von Neumann entropy with logarithms to the given base.
    pub fn vn_entropy(&self, base: f64) -> f64 {
        entropy_of_spectrum(&self.eigenvalues(), base)
    }

    /// Largest entry-wise modulus of `self - other`.
    pub fn max_norm_distance(&self, other: &DensityMatrix) -> f64 {
        if self.mat.shape() != other.mat.shape() {
            return f64::INFINITY;
        }
        (&self.mat - &other.mat).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

fn dense_spectrum(mat: DMatrix<Complex64>) -> Vec<f64> {
    let d = mat.nrows();
    let finite = |v: Vec<f64>| v.iter().all(|x| x.is_finite()).then_some(v);
    let id = DMatrix::<f64>::identity(d, d);
    // the implicit QR sweep can underflow on very sparse rank-one inputs;
    // a unit shift or an SVD (equal to the spectrum for PSD input) recovers
    let spectrum = if mat.iter().all(|z| z.im.abs() <= f64::EPSILON) {
        let real = mat.map(|z| z.re);
        finite(real.clone().symmetric_eigenvalues().iter().copied().collect())
            .or_else(|| finite((&real + &id).symmetric_eigenvalues().iter().map(|x| x - 1.0).collect()))
            .or_else(|| finite(real.singular_values().iter().copied().collect()))
    } else {
        let cid = id.map(|x| Complex64::new(x, 0.0));
        finite(mat.clone().symmetric_eigenvalues().iter().copied().collect())
            .or_else(|| finite((&mat + &cid).symmetric_eigenvalues().iter().map(|x| x - 1.0).collect()))
            .or_else(|| finite(mat.singular_values().iter().copied().collect()))
    };
    spectrum.unwrap_or_else(|| vec![f64::NAN; d])
}

pub fn entropy_of_spectrum(eigs: &[f64], base: f64) -> f64 {
    let h: f64 = eigs.iter().filter(|&&l| l > EIGEN_CLAMP).map(|&l| -l * l.ln()).sum();
    // -0.0 and rounding dust both read as zero
    (h / base.ln()).max(0.0)
}

pub fn vn_entropy(rho: &DensityMatrix, base: f64) -> f64 {
    rho.vn_entropy(base)
}

pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix, DensimError> {
    rho.partial_trace(keep)
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

/// One tensor factor of a symbolic state restricted to a subset of slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Factor {
    Classical {
        slot: usize,
        x: u32,
    },
    /// Both halves present: a pure displaced Bell state on (first, second).
    Bell {
        first: usize,
        second: usize,
        x: u32,
        z: u32,
    },
    /// A lone half: maximally mixed.
    Mixed {
        slot: usize,
    },
}

impl Factor {
    fn slots(&self) -> Vec<usize> {
        match *self {
            Factor::Classical { slot, .. } | Factor::Mixed { slot } => vec![slot],
            Factor::Bell { first, second, .. } => vec![first, second],
        }
    }
}

fn factorise(state: &SymbolicState, slots: &[usize]) -> Result<Vec<Factor>, DensimError> {
    let layout = state.layout();
    let mut seen = vec![false; layout.len()];
    for &s in slots {
        if s >= layout.len() {
            return Err(QsymError::UnknownSlot(s).into());
        }
        if seen[s] {
            return Err(DensimError::RepeatedSlot(layout.slot(s).label.clone()));
        }
        seen[s] = true;
    }
    let mut factors = Vec::new();
    let mut done = vec![false; layout.len()];
    for &s in slots {
        if done[s] {
            continue;
        }
        done[s] = true;
        let f = match state.content(s) {
            SlotContent::Classical(x) => Factor::Classical { slot: s, x },
            SlotContent::Erased => return Err(DensimError::ErasedSlot(layout.slot(s).label.clone())),
            SlotContent::BellHalf { pair, .. } => {
                let rec = state.pair(pair);
                match (rec.halves[0], rec.halves[1]) {
                    (Some(a), Some(b)) if seen[a] && seen[b] => {
                        done[a] = true;
                        done[b] = true;
                        Factor::Bell { first: a, second: b, x: rec.x, z: rec.z }
                    }
                    _ => Factor::Mixed { slot: s },
                }
            }
        };
        factors.push(f);
    }
    Ok(factors)
}

/// Amplitudes of `(X^x Z^z ⊗ I)|Φ⟩` on a pair of `p^m`-dimensional slots.
pub fn bell_vector(p: u32, m: u32, x: u32, z: u32) -> Vec<Complex64> {
    let dim = p.pow(m) as usize;
    let norm = 1.0 / (dim as f64).sqrt();
    let mut v = vec![Complex64::new(0.0, 0.0); dim * dim];
    for i in 0..dim as u32 {
        let phase = 2.0 * PI * digit_dot(p, z, i) as f64 / p as f64;
        let a = crate::gf::digit_add(p, i, x) as usize;
        v[a * dim + i as usize] = Complex64::from_polar(norm, phase);
    }
    v
}

fn factor_density(state: &SymbolicState, f: &Factor) -> DensityMatrix {
    let layout = state.layout();
    match *f {
        Factor::Classical { slot, x } => {
            let d = layout.slot(slot).dim() as usize;
            let mut mat = DMatrix::zeros(d, d);
            mat[(x as usize, x as usize)] = Complex64::new(1.0, 0.0);
            DensityMatrix { dims: vec![d], mat }
        }
        Factor::Mixed { slot } => DensityMatrix::maximally_mixed(vec![layout.slot(slot).dim() as usize]),
        Factor::Bell { first, x, z, .. } => {
            let s = layout.slot(first);
            let d = s.dim() as usize;
            DensityMatrix::pure(vec![d, d], &bell_vector(s.p, s.m, x, z))
        }
    }
}

fn subset_dim(state: &SymbolicState, slots: &[usize]) -> usize {
    slots.iter().map(|&s| state.layout().slot(s).dim() as usize).product()
}

/// Density operator of the listed slots, subsystems in the listed order.
pub fn to_density(state: &SymbolicState, slots: &[usize]) -> Result<DensityMatrix, DensimError> {
    let dim = subset_dim(state, slots);
    if dim > MAX_DIM {
        return Err(DensimError::DimensionCap { dim });
    }
    let dims = slots.iter().map(|&s| state.layout().slot(s).dim() as usize).collect();
    let mut mat = DMatrix::zeros(dim, dim);
    for (r, c, v) in density_entries(state, slots)? {
        mat[(r, c)] = v;
    }
    Ok(DensityMatrix { dims, mat })
}

/// Nonzero entries `(row, col, value)` of [`to_density`], built factor by
/// factor. Per-message states are products of small pieces, so this is far
/// sparser than the matrix itself.
pub fn density_entries(state: &SymbolicState, slots: &[usize]) -> Result<Vec<(usize, usize, Complex64)>, DensimError> {
    let factors = factorise(state, slots)?;
    let dims: Vec<usize> = slots.iter().map(|&s| state.layout().slot(s).dim() as usize).collect();
    let target = strides(&dims);
    let stride_of =
        |slot: usize| target[slots.iter().position(|&s| s == slot).expect("factor slots come from `slots`")];
    let zero = Complex64::new(0.0, 0.0);
    let mut entries = vec![(0, 0, Complex64::new(1.0, 0.0))];
    for f in &factors {
        let rho = factor_density(state, f);
        let local = strides(&rho.dims);
        let f_slots = f.slots();
        let offset = |i: usize| -> usize {
            f_slots.iter().zip(&local).zip(&rho.dims).map(|((&s, &st), &d)| (i / st % d) * stride_of(s)).sum()
        };
        let mut nonzero = Vec::new();
        for i in 0..rho.dim() {
            for j in 0..rho.dim() {
                if rho.mat[(i, j)] != zero {
                    nonzero.push((offset(i), offset(j), rho.mat[(i, j)]));
                }
            }
        }
        entries = entries
            .iter()
            .flat_map(|&(r, c, v)| nonzero.iter().map(move |&(r2, c2, v2)| (r + r2, c + c2, v * v2)))
            .collect();
    }
    Ok(entries)
}

/// Same as [`to_density`] but addressed by slot labels.
pub fn to_density_labels(state: &SymbolicState, labels: &[&str]) -> Result<DensityMatrix, DensimError> {
    let slots = labels.iter().map(|l| state.index_of(l)).collect::<Result<Vec<_>, _>>()?;
    to_density(state, &slots)
}

// Reorders subsystems of `rho` (currently ordered as `from`) into the order `to`.
fn permute_to(rho: &DensityMatrix, from: &[usize], to: &[usize]) -> DensityMatrix {
    if from == to {
        return rho.clone();
    }
    let pos_in_from: Vec<usize> = to.iter().map(|s| from.iter().position(|f| f == s).unwrap()).collect();
    let from_strides = strides(&rho.dims);
    let to_dims: Vec<usize> = pos_in_from.iter().map(|&p| rho.dims[p]).collect();
    let d = rho.dim();
    let mut map = vec![0usize; d];
    let mut digits = vec![0usize; to.len()];
    for slot in map.iter_mut() {
        *slot = digits.iter().zip(&pos_in_from).map(|(&i, &p)| i * from_strides[p]).sum();
        for k in (0..digits.len()).rev() {
            digits[k] += 1;
            if digits[k] < to_dims[k] {
                break;
            }
            digits[k] = 0;
        }
    }
    let mat = DMatrix::from_fn(d, d, |i, j| rho.mat[(map[i], map[j])]);
    DensityMatrix { dims: to_dims, mat }
}

/// Entropy of the listed slots, summed over the tensor factors of the
/// symbolic state. Each factor is materialised and diagonalised on its own,
/// so this stays cheap for registers far beyond [`MAX_DIM`].
pub fn subset_entropy(state: &SymbolicState, slots: &[usize], base: f64) -> Result<f64, DensimError> {
    let factors = factorise(state, slots)?;
    Ok(factors.iter().map(|f| factor_density(state, f).vn_entropy(base)).sum())
}

/// Reduced state of `keep`, obtained by materialising every pair that
/// straddles the boundary and tracing out the half outside `keep`.
///
/// Unlike [`to_density`], lone halves are not assumed maximally mixed; the
/// marginal is computed. The result is the tensor product of the per-factor
/// marginals, subsystems in the order of `keep`.
pub fn reduced_by_partial_trace(state: &SymbolicState, keep: &[usize]) -> Result<DensityMatrix, DensimError> {
    let dim = subset_dim(state, keep);
    if dim > MAX_DIM {
        return Err(DensimError::DimensionCap { dim });
    }
    let mut rho = DensityMatrix::trivial();
    let mut order = Vec::with_capacity(keep.len());
    for (slots, part) in reduced_factors(state, keep)? {
        rho = rho.kron(&part);
        order.extend(slots);
    }
    Ok(permute_to(&rho, &order, keep))
}

/// The tensor factors of the reduced state of `keep`, each with the slots it
/// covers. Only factor-sized matrices are built, so `keep` may be far larger
/// than [`MAX_DIM`].
pub fn reduced_factors(state: &SymbolicState, keep: &[usize]) -> Result<Vec<(Vec<usize>, DensityMatrix)>, DensimError> {
    factorise(state, keep)?
        .iter()
        .map(|f| {
            let part = match *f {
                Factor::Mixed { slot } => match state.partner(slot) {
                    Some(other) => to_density(state, &[slot, other])?.partial_trace(&[0])?,
                    // partner erased: nothing to trace, the half is all that is left
                    None => factor_density(state, f),
                },
                _ => factor_density(state, f),
            };
            Ok((f.slots(), part))
        })
        .collect()
}

/// A classical-quantum ensemble `{p_m, σ_m}`.
#[derive(Debug, Clone)]
pub struct CqEnsemble {
    pub labels: Vec<usize>,
    pub weights: Vec<f64>,
    pub states: Vec<DensityMatrix>,
}

impl CqEnsemble {
    /// Equiprobable ensemble labelled `0..states.len()`.
    pub fn uniform(states: Vec<DensityMatrix>) -> Self {
        let n = states.len();
        CqEnsemble { labels: (0..n).collect(), weights: vec![1.0 / n as f64; n], states }
    }

    fn check(&self) -> Result<(), DensimError> {
        if self.states.is_empty() || self.states.len() != self.weights.len() {
            return Err(DensimError::BadWeights);
        }
        if (self.weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(DensimError::BadWeights);
        }
        let dims = self.states[0].dims();
        if self.states.iter().any(|s| s.dims() != dims) {
            return Err(DensimError::LayoutMismatch);
        }
        if self.states[0].dim() > MAX_DIM || self.states.len() > MAX_DIM {
            return Err(DensimError::DimensionCap { dim: self.states[0].dim().max(self.states.len()) });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CqQuantities {
    /// `S(Σ p_m σ_m)`
    pub h_avg: f64,
    /// `Σ p_m S(σ_m)`
    pub h_cond: f64,
    /// `h_avg - h_cond`
    pub holevo: f64,
}

pub fn cq_quantities(ens: &CqEnsemble, base: f64) -> Result<CqQuantities, DensimError> {
    ens.check()?;
    let mut acc = CqAccumulator::new(ens.states[0].dims().to_vec());
    for (w, s) in ens.weights.iter().zip(&ens.states) {
        acc.add(*w, s, s.vn_entropy(base))?;
    }
    Ok(acc.finish(base))
}

/// Streams ensemble members into the averaged state and the averaged entropy.
#[derive(Debug, Clone)]
pub struct CqAccumulator {
    dims: Vec<usize>,
    sum: DMatrix<Complex64>,
    cond: f64,
    weight: f64,
}

impl CqAccumulator {
    pub fn new(dims: Vec<usize>) -> Self {
        let d: usize = dims.iter().product();
        CqAccumulator { dims, sum: DMatrix::zeros(d, d), cond: 0.0, weight: 0.0 }
    }

    /// Adds `w σ` with `entropy = S(σ)` supplied by the caller.
    pub fn add(&mut self, w: f64, state: &DensityMatrix, entropy: f64) -> Result<(), DensimError> {
        if state.dims() != self.dims.as_slice() {
            return Err(DensimError::LayoutMismatch);
        }
        self.sum += &state.mat * Complex64::new(w, 0.0);
        self.cond += w * entropy;
        self.weight += w;
        Ok(())
    }

    /// Like [`add`](Self::add) for a state given by its nonzero entries, as
    /// from [`density_entries`].
    pub fn add_entries(&mut self, w: f64, entries: &[(usize, usize, Complex64)], entropy: f64) {
        for &(r, c, v) in entries {
            self.sum[(r, c)] += v * w;
        }
        self.cond += w * entropy;
        self.weight += w;
    }

    pub fn average(&self) -> DensityMatrix {
        DensityMatrix { dims: self.dims.clone(), mat: self.sum.clone() }
    }

    pub fn finish(&self, base: f64) -> CqQuantities {
        let h_avg = self.average().vn_entropy(base);
        CqQuantities { h_avg, h_cond: self.cond, holevo: h_avg - self.cond }
    }
}
