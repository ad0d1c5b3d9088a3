//! Classical MDS codes: Reed–Solomon generators, encoding, erasure decoding.

use itertools::Itertools;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gf::{Field, GfError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MdsError {
    #[error("block length {n} exceeds the field order {order}")]
    LengthExceedsField { n: usize, order: u32 },
    #[error("message length {k} exceeds block length {n}")]
    DimensionExceedsLength { k: usize, n: usize },
    #[error("no MDS generator with n = {n}, k = {k} is available over GF({order})")]
    NoMdsCode { n: usize, k: usize, order: u32 },
    #[error("expected {expected} symbols, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("only {survivors} positions survive, {needed} are required")]
    TooFewSurvivors { survivors: usize, needed: usize },
    #[error("singular system on columns {columns:?}; the generator is not MDS")]
    Singular { columns: Vec<usize> },
    #[error("rows have inconsistent lengths")]
    Ragged,
    #[error(transparent)]
    Field(#[from] GfError),
}

/// A `k × n` generator matrix over a finite field, entries as integer reps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorMatrix {
    field: Field,
    k: usize,
    n: usize,
    rows: Vec<Vec<u32>>,
    flagged_mds: bool,
}

/// Rows of the binary `[3, 2, 2]` generator used by the worked example.
pub const EXAMPLE_BINARY_G: [[u32; 3]; 2] = [[1, 0, 1], [0, 1, 1]];

impl GeneratorMatrix {
    /// Wraps explicit rows. The MDS flag is set only if `is_mds` confirms it.
    pub fn from_rows(field: &Field, n: usize, rows: Vec<Vec<u32>>) -> Result<Self, MdsError> {
        for row in &rows {
            if row.len() != n {
                return Err(MdsError::Ragged);
            }
            for &v in row {
                if v >= field.order() {
                    return Err(GfError::OutOfRange { value: v, order: field.order() }.into());
                }
            }
        }
        let k = rows.len();
        if k > n {
            return Err(MdsError::DimensionExceedsLength { k, n });
        }
        let mut g = GeneratorMatrix { field: field.clone(), k, n, rows, flagged_mds: false };
        g.flagged_mds = g.is_mds();
        Ok(g)
    }

    /// The binary generator of the worked `[3, 2, 2]` example.
    pub fn example_binary() -> Self {
        let field = Field::new(2, 1).expect("GF(2)");
        let rows = EXAMPLE_BINARY_G.iter().map(|r| r.to_vec()).collect();
        GeneratorMatrix { field, k: 2, n: 3, rows, flagged_mds: true }
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> &[Vec<u32>] {
        &self.rows
    }

    pub fn flagged_mds(&self) -> bool {
        self.flagged_mds
    }

    /// True iff every `k × k` column submatrix is nonsingular.
    pub fn is_mds(&self) -> bool {
        is_mds(self)
    }
}

/// Vandermonde generator with entry `(i, j) = e_j^i`, `e_j` the element of rep `j`.
pub fn rs_generator(n: usize, k: usize, field: &Field) -> Result<GeneratorMatrix, MdsError> {
    if n > field.order() as usize {
        return Err(MdsError::LengthExceedsField { n, order: field.order() });
    }
    if k > n {
        return Err(MdsError::DimensionExceedsLength { k, n });
    }
    let rows = (0..k).map(|i| (0..n).map(|j| field.pow(j as u32, i as u64)).collect()).collect();
    Ok(GeneratorMatrix { field: field.clone(), k, n, rows, flagged_mds: true })
}

/// An MDS generator for `[n, k]` over `field`.
///
/// Uses Reed–Solomon when `n <= q̄`. Past that length only the trivial MDS
/// families exist in general: `k = 0`, repetition (`k = 1`), single parity
/// check (`k = n - 1`, systematic `[I | 1]`) and the identity (`k = n`). For
/// `n = 3, k = 2` the parity check generator is exactly [`EXAMPLE_BINARY_G`].
pub fn mds_generator(n: usize, k: usize, field: &Field) -> Result<GeneratorMatrix, MdsError> {
    if k > n {
        return Err(MdsError::DimensionExceedsLength { k, n });
    }
    if n <= field.order() as usize {
        return rs_generator(n, k, field);
    }
    let rows: Vec<Vec<u32>> = if k == 0 {
        Vec::new()
    } else if k == 1 {
        vec![vec![1; n]]
    } else if k == n || k + 1 == n {
        (0..k).map(|i| (0..n).map(|j| u32::from(j == i || j == k)).collect()).collect()
    } else {
        return Err(MdsError::NoMdsCode { n, k, order: field.order() });
    };
    Ok(GeneratorMatrix { field: field.clone(), k, n, rows, flagged_mds: true })
}

/// Returns `msg · G`.
pub fn mds_encode(msg: &[u32], g: &GeneratorMatrix) -> Result<Vec<u32>, MdsError> {
    if msg.len() != g.k {
        return Err(MdsError::LengthMismatch { expected: g.k, found: msg.len() });
    }
    let f = &g.field;
    if let Some(&v) = msg.iter().find(|&&v| v >= f.order()) {
        return Err(GfError::OutOfRange { value: v, order: f.order() }.into());
    }
    let mut word = vec![0u32; g.n];
    for (u, row) in msg.iter().zip(&g.rows) {
        if *u == 0 {
            continue;
        }
        for (w, &gij) in word.iter_mut().zip(row) {
            *w = f.add(*w, f.mul(*u, gij));
        }
    }
    Ok(word)
}

/// A received word: `None` marks an erased position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErasedWord {
    symbols: Vec<Option<u32>>,
    erased: usize,
}

impl ErasedWord {
    pub fn new(symbols: Vec<Option<u32>>) -> Self {
        let erased = symbols.iter().filter(|s| s.is_none()).count();
        ErasedWord { symbols, erased }
    }

    /// Starts with every position erased.
    pub fn all_erased(n: usize) -> Self {
        ErasedWord { symbols: vec![None; n], erased: n }
    }

    pub fn set(&mut self, pos: usize, value: u32) {
        if self.symbols[pos].is_none() {
            self.erased -= 1;
        }
        self.symbols[pos] = Some(value);
    }

    pub fn erase(&mut self, pos: usize) {
        if self.symbols[pos].is_some() {
            self.erased += 1;
        }
        self.symbols[pos] = None;
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn erased_count(&self) -> usize {
        self.erased
    }

    pub fn symbols(&self) -> &[Option<u32>] {
        &self.symbols
    }
}

/// Recovers the message from the first `k` surviving positions.
pub fn mds_erasure_decode(word: &ErasedWord, g: &GeneratorMatrix) -> Result<Vec<u32>, MdsError> {
    if word.len() != g.n {
        return Err(MdsError::LengthMismatch { expected: g.n, found: word.len() });
    }
    let k = g.k;
    let columns: Vec<usize> = word.symbols.iter().enumerate().filter_map(|(j, s)| s.map(|_| j)).take(k).collect();
    if columns.len() < k {
        return Err(MdsError::TooFewSurvivors { survivors: g.n - word.erased, needed: k });
    }
    // u · G_S = w_S  <=>  G_S^T u^T = w_S^T
    let mut aug: Vec<Vec<u32>> = columns
        .iter()
        .map(|&j| {
            let mut row: Vec<u32> = (0..k).map(|i| g.rows[i][j]).collect();
            row.push(word.symbols[j].unwrap());
            row
        })
        .collect();
    solve_in_place(&g.field, &mut aug).ok_or(MdsError::Singular { columns })
}

// Gauss-Jordan on a k × (k+1) augmented system; None if singular.
fn solve_in_place(f: &Field, aug: &mut [Vec<u32>]) -> Option<Vec<u32>> {
    let k = aug.len();
    for col in 0..k {
        let pivot = (col..k).find(|&r| aug[r][col] != 0)?;
        aug.swap(col, pivot);
        let inv = f.inv(aug[col][col]).unwrap();
        for v in aug[col].iter_mut() {
            *v = f.mul(*v, inv);
        }
        for r in 0..k {
            if r == col || aug[r][col] == 0 {
                continue;
            }
            let factor = aug[r][col];
            let (target, pivot) = two_rows(aug, r, col);
            for (x, &p) in target[col..=k].iter_mut().zip(&pivot[col..=k]) {
                *x = f.sub(*x, f.mul(factor, p));
            }
        }
    }
    Some(aug.iter().map(|row| row[k]).collect())
}

// Row `target` mutably alongside row `pivot`; the indices must differ.
fn two_rows(m: &mut [Vec<u32>], target: usize, pivot: usize) -> (&mut [u32], &[u32]) {
    if target < pivot {
        let (lo, hi) = m.split_at_mut(pivot);
        (&mut lo[target], &hi[0])
    } else {
        let (lo, hi) = m.split_at_mut(target);
        (&mut hi[0], &lo[pivot])
    }
}

/// Rank of a matrix over `f`.
pub fn rank(f: &Field, rows: &[Vec<u32>]) -> usize {
    let mut m: Vec<Vec<u32>> = rows.to_vec();
    let ncols = m.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for col in 0..ncols {
        let Some(pivot) = (rank..m.len()).find(|&r| m[r][col] != 0) else { continue };
        m.swap(rank, pivot);
        let inv = f.inv(m[rank][col]).unwrap();
        for r in 0..m.len() {
            if r == rank || m[r][col] == 0 {
                continue;
            }
            let factor = f.mul(m[r][col], inv);
            let (target, pivot) = two_rows(&mut m, r, rank);
            for (x, &p) in target[col..].iter_mut().zip(&pivot[col..]) {
                *x = f.sub(*x, f.mul(factor, p));
            }
        }
        rank += 1;
    }
    rank
}

/// Exhaustive check over all `C(n, k)` column subsets.
pub fn is_mds(g: &GeneratorMatrix) -> bool {
    if g.k == 0 {
        return true;
    }
    (0..g.n).combinations(g.k).all(|cols| {
        let sub: Vec<Vec<u32>> = g.rows.iter().map(|row| cols.iter().map(|&j| row[j]).collect()).collect();
        rank(&g.field, &sub) == g.k
    })
}
