//! Numerical replay of the converse for separate encoders.
//!
//! For a concrete code the classical-quantum ensemble `{σ_m}` over all
//! messages is built. Every quantity in the two inequality chains is then
//! evaluated in base `q`, and each transition is checked. Per-message entropies
//! come from the symbolic factorisation. Averaged states are materialised
//! densely, one subset at a time.
//!
//! Notation in labels: `X = Q_I`, `Y = Q_J`, `B` = all of Bob's memory, `M` the
//! uniform message and `M̂` the decoder output for the erasure pattern
//! `[n] \ (I ∪ J)`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::bounds;
use crate::codes::{message_from_index, CodeError, CodeParams, EaccCode, ErasurePattern};
use crate::densim::{self, CqAccumulator, DensimError, DensityMatrix};
use crate::qsym::SymbolicState;
use crate::rational;
use crate::verify::check_separate_encoders;
use crate::SCHEMA_VERSION;

/// Largest message set the auditor enumerates.
pub const MAX_AUDIT_MESSAGES: u128 = 1 << 12;
/// Tolerance on every (in)equality.
pub const TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AuditError {
    #[error("code does not use separate encoders (crossing edge {0})")]
    NotSeparate(String),
    #[error("chain {chain} needs {needs}, got d = {d}, c = {c}")]
    WrongRegime { chain: u8, needs: &'static str, d: usize, c: usize },
    #[error("invalid position sets: {0}")]
    BadSets(String),
    #[error("{0} messages exceed the audit limit")]
    TooManyMessages(String),
    #[error(transparent)]
    Densim(#[from] DensimError),
    #[error(transparent)]
    Code(#[from] CodeError),
}

/// Which chain: entanglement-rich (`d - 1 <= c`) or entanglement-poor (`c <= d - 1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Chain {
    Rich,
    Poor,
}

impl Chain {
    pub fn number(self) -> u8 {
        match self {
            Chain::Rich => 1,
            Chain::Poor => 2,
        }
    }

    pub fn from_number(n: u8) -> Option<Chain> {
        match n {
            1 => Some(Chain::Rich),
            2 => Some(Chain::Poor),
            _ => None,
        }
    }
}

/// A code with the position sets `I`, `J` (zero-based) the chain is evaluated on.
#[derive(Debug, Clone)]
pub struct AuditInstance {
    code: EaccCode,
    chain: Chain,
    i_set: Vec<usize>,
    j_set: Vec<usize>,
}

impl AuditInstance {
    /// The sets used in the converse: `I = {d..c}`, `J = {c+1..n}` for the rich
    /// chain and `I = ∅`, `J = {d..n}` for the poor one (one-based).
    pub fn standard(code: EaccCode, chain: Chain) -> Result<Self, AuditError> {
        let CodeParams { n, d, c, .. } = *code.params();
        let (i_set, j_set) = match chain {
            Chain::Rich => ((d.saturating_sub(1)..c).collect(), (c..n).collect()),
            Chain::Poor => (Vec::new(), (d.saturating_sub(1)..n).collect()),
        };
        AuditInstance::new(code, chain, i_set, j_set)
    }

    pub fn new(code: EaccCode, chain: Chain, i_set: Vec<usize>, j_set: Vec<usize>) -> Result<Self, AuditError> {
        let CodeParams { n, d, c, .. } = *code.params();
        match chain {
            Chain::Rich if d - 1 > c => {
                return Err(AuditError::WrongRegime { chain: 1, needs: "d - 1 <= c", d, c });
            }
            Chain::Poor if c > d - 1 => {
                return Err(AuditError::WrongRegime { chain: 2, needs: "c <= d - 1", d, c });
            }
            _ => {}
        }
        let bad = |msg: String| Err(AuditError::BadSets(msg));
        let mut seen = vec![false; n];
        for &p in i_set.iter().chain(&j_set) {
            if p >= n || seen[p] {
                return bad(format!("position {} repeated or out of range", p + 1));
            }
            seen[p] = true;
        }
        match chain {
            Chain::Rich => {
                if i_set.len() != c + 1 - d || i_set.iter().any(|&p| p >= c) {
                    return bad(format!("I must be {} positions among 1..={c}", c + 1 - d));
                }
                if j_set != (c..n).collect::<Vec<_>>() {
                    return bad(format!("J must be {{{}..{n}}}", c + 1));
                }
            }
            Chain::Poor => {
                if !i_set.is_empty() {
                    return bad("I must be empty".into());
                }
                if j_set.len() != n + 1 - d || j_set.iter().any(|&p| p < c) {
                    return bad(format!("J must be {} positions among {}..={n}", n + 1 - d, c + 1));
                }
            }
        }
        let sep = check_separate_encoders(&code);
        if !sep.separate {
            return Err(AuditError::NotSeparate(sep.witness.unwrap_or_default()));
        }
        let space = code.message_space().unwrap_or(u128::MAX);
        if space > MAX_AUDIT_MESSAGES {
            return Err(AuditError::TooManyMessages(code.message_space().map_or("too many".into(), |s| s.to_string())));
        }
        Ok(AuditInstance { code, chain, i_set, j_set })
    }

    pub fn code(&self) -> &EaccCode {
        &self.code
    }

    pub fn chain(&self) -> Chain {
        self.chain
    }

    pub fn i_set(&self) -> &[usize] {
        &self.i_set
    }

    pub fn j_set(&self) -> &[usize] {
        &self.j_set
    }

    /// Positions outside `I ∪ J`, sorted.
    pub fn erased(&self) -> Vec<usize> {
        (0..self.code.params().n).filter(|p| !self.i_set.contains(p) && !self.j_set.contains(p)).collect()
    }

    /// Encoded states and decoder outputs for every message.
    pub fn ensemble(&self) -> Result<Ensemble, AuditError> {
        let code = &self.code;
        let q_bar = code.params().q_bar;
        let dits = code.message_dits();
        let space = code.message_space().expect("checked at construction");
        let pattern = ErasurePattern::new(code.params().n, self.erased())?;
        let prepared = code.prepare()?;
        let members = (0..space)
            .into_par_iter()
            .map(|i| {
                let msg = message_from_index(i, q_bar, dits);
                let state = code.encode_prepared(&prepared, &msg)?;
                let mut received = state.clone();
                code.erase(&mut received, pattern.positions())?;
                let decoded = code.decode(received, &pattern).ok();
                Ok((state, decoded))
            })
            .collect::<Result<Vec<_>, CodeError>>()?;
        let (states, decoded) = members.into_iter().unzip();
        Ok(Ensemble { states, decoded })
    }
}

/// A uniform classical-quantum ensemble with the decoder's guesses.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub states: Vec<SymbolicState>,
    /// `None` where the decoder failed.
    pub decoded: Vec<Option<Vec<u32>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "<=")]
    Le,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Eq => "=",
            Relation::Le => "≤",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Step {
    pub label: &'static str,
    pub lhs_expr: &'static str,
    pub rhs_expr: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub relation: Relation,
    /// `rhs - lhs` for `≤`, `|lhs - rhs|` for `=`.
    pub slack: f64,
    pub holds: bool,
    /// Side condition justifying a chain step rather than a chain step itself.
    pub witness: bool,
}

impl Step {
    fn new(
        label: &'static str,
        lhs_expr: &'static str,
        lhs: f64,
        relation: Relation,
        rhs_expr: &'static str,
        rhs: f64,
    ) -> Step {
        let (slack, holds) = match relation {
            Relation::Eq => ((lhs - rhs).abs(), (lhs - rhs).abs() <= TOLERANCE),
            Relation::Le => (rhs - lhs, lhs <= rhs + TOLERANCE),
        };
        Step { label, lhs_expr, rhs_expr, lhs, rhs, relation, slack, holds, witness: false }
    }

    fn witness(mut self) -> Step {
        self.witness = true;
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StepReport {
    pub schema: &'static str,
    pub code_params: CodeParams,
    pub chain: u8,
    /// One-based.
    pub i_set: Vec<usize>,
    pub j_set: Vec<usize>,
    pub erased: Vec<usize>,
    pub messages: usize,
    /// Named quantities, base `q`.
    pub values: BTreeMap<&'static str, f64>,
    pub steps: Vec<Step>,
    /// Last value of the chain.
    pub terminal: f64,
    /// The converse's bound for these parameters, exact.
    #[serde(with = "crate::rational::as_string")]
    pub bound: rational::Rational,
    pub overall: bool,
}

impl StepReport {
    pub fn failed_steps(&self) -> impl Iterator<Item = &Step> {
        self.steps.iter().filter(|s| !s.holds)
    }
}

impl fmt::Display for StepReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let set = |v: &[usize]| format!("{{{}}}", v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","));
        writeln!(
            f,
            "chain {} on {}  I = {}  J = {}  erased = {}  ({} messages, logs base q)",
            self.chain,
            self.code_params,
            set(&self.i_set),
            set(&self.j_set),
            set(&self.erased),
            self.messages
        )?;
        writeln!(f, "{:<26} {:>12}  {:<2} {:>12}  {:>10}  result", "step", "lhs", "", "rhs", "slack")?;
        for s in &self.steps {
            let label = if s.witness { format!("  ({})", s.label) } else { s.label.to_string() };
            writeln!(
                f,
                "{:<26} {:>12.9}  {:<2} {:>12.9}  {:>10.3e}  {}",
                label,
                s.lhs,
                s.relation.to_string(),
                s.rhs,
                s.slack,
                if s.holds { "HOLD" } else { "FAIL" }
            )?;
        }
        writeln!(
            f,
            "terminal {:.9} vs bound {}: {}",
            self.terminal,
            self.bound,
            if self.overall { "ALL HOLD" } else { "FAILED" }
        )
    }
}

// Base-q entropies of one subset: averaged state and per-message average.
struct SubsetEntropies {
    averaged: f64,
    conditional: f64,
}

fn subset_entropies(states: &[SymbolicState], slots: &[usize], base: f64) -> Result<SubsetEntropies, AuditError> {
    let w = 1.0 / states.len() as f64;
    let per_message: Vec<f64> =
        states.par_iter().map(|s| densim::subset_entropy(s, slots, base)).collect::<Result<_, _>>()?;
    let conditional = per_message.iter().sum::<f64>() * w;
    if slots.is_empty() {
        return Ok(SubsetEntropies { averaged: 0.0, conditional });
    }
    let first = densim::to_density(&states[0], slots)?;
    let mut acc = CqAccumulator::new(first.dims().to_vec());
    for (s, h) in states.iter().zip(&per_message) {
        acc.add_entries(w, &densim::density_entries(s, slots)?, *h);
    }
    Ok(SubsetEntropies { averaged: acc.finish(base).h_avg, conditional })
}

// H(M̂) in base q; equals I(M; M̂) because the decoder is deterministic.
fn decoder_information(decoded: &[Option<Vec<u32>>], base: f64) -> f64 {
    let mut counts: HashMap<&Option<Vec<u32>>, usize> = HashMap::new();
    for d in decoded {
        *counts.entry(d).or_default() += 1;
    }
    let total = decoded.len() as f64;
    counts.values().map(|&c| c as f64 / total).map(|p| -p * p.ln()).sum::<f64>() / base.ln()
}

/// Audits the chain matching the instance's regime.
pub fn audit(inst: &AuditInstance) -> Result<StepReport, AuditError> {
    let ens = inst.ensemble()?;
    audit_with_ensemble(inst, &ens)
}

pub fn audit_regime1(inst: &AuditInstance) -> Result<StepReport, AuditError> {
    if inst.chain != Chain::Rich {
        let p = inst.code.params();
        return Err(AuditError::WrongRegime { chain: 1, needs: "the rich-chain position sets", d: p.d, c: p.c });
    }
    audit(inst)
}

pub fn audit_regime2(inst: &AuditInstance) -> Result<StepReport, AuditError> {
    if inst.chain != Chain::Poor {
        let p = inst.code.params();
        return Err(AuditError::WrongRegime { chain: 2, needs: "the poor-chain position sets", d: p.d, c: p.c });
    }
    audit(inst)
}

/// Evaluates the instance's chain on an arbitrary ensemble over its layout.
pub fn audit_with_ensemble(inst: &AuditInstance, ens: &Ensemble) -> Result<StepReport, AuditError> {
    let code = &inst.code;
    let params = *code.params();
    let CodeParams { n, d, c, .. } = params;
    if ens.states.is_empty() || ens.states.len() != ens.decoded.len() {
        return Err(AuditError::BadSets("ensemble is empty or ragged".into()));
    }
    let base = (params.q_bar as f64).powi(params.r as i32);
    let x = code.channel_slots(&inst.i_set);
    let y = code.channel_slots(&inst.j_set);
    let b = code.bob_slots();
    let join = |parts: &[&[usize]]| parts.concat();

    let h_m = (ens.states.len() as f64).ln() / base.ln();
    let k = rational::to_f64(&params.k);
    let i_m_mhat = decoder_information(&ens.decoded, base);
    let nd1 = (n + 1 - d) as f64;
    let bound = bounds::separate_singleton(n as i64, d as i64, c as i64).expect("admissible").value;

    let mut values = BTreeMap::new();
    let mut steps = Vec::new();
    values.insert("k", k);
    values.insert("H(M)", h_m);
    values.insert("I(M;M̂)", i_m_mhat);
    steps.push(Step::new("message entropy", "H(M)", h_m, Relation::Eq, "k", k));
    steps.push(Step::new("perfect decoding", "H(M)", h_m, Relation::Eq, "I(M;M̂)", i_m_mhat));

    let eb = subset_entropies(&ens.states, &b, base)?;
    let i_m_b = eb.averaged - eb.conditional;
    values.insert("I(M;B)", i_m_b);

    let terminal = match inst.chain {
        Chain::Rich => {
            let exyb = subset_entropies(&ens.states, &join(&[&x, &y, &b]), base)?;
            let exb = subset_entropies(&ens.states, &join(&[&x, &b]), base)?;
            let exy = subset_entropies(&ens.states, &join(&[&x, &y]), base)?;
            let ey = subset_entropies(&ens.states, &y, base)?;
            let i_m_xyb = exyb.averaged - exyb.conditional;
            let cmi = i_m_xyb - i_m_b;
            let h_xy_b = exyb.averaged - eb.averaged;
            let h_xy_mb = exyb.conditional - eb.conditional;
            let h_x_mb = exb.conditional - eb.conditional;
            let h_y_xmb = exyb.conditional - exb.conditional;
            let h_y_m = ey.conditional;
            let h_xy = exy.averaged;
            let size_xy = (inst.i_set.len() + inst.j_set.len()) as f64;
            let size_x = inst.i_set.len() as f64;
            let cd1 = c as f64 + 1.0 - d as f64;
            for (name, v) in [
                ("I(M;XYB)", i_m_xyb),
                ("I(M;XY|B)", cmi),
                ("H(XY|B)", h_xy_b),
                ("H(XY|MB)", h_xy_mb),
                ("H(X|MB)", h_x_mb),
                ("-H(X|MB)", -h_x_mb),
                ("H(Y|XMB)", h_y_xmb),
                ("H(Y|M)", h_y_m),
                ("H(XY)", h_xy),
            ] {
                values.insert(name, v);
            }
            let after_dim = nd1 - h_x_mb - h_y_xmb;
            let after_indep = nd1 - h_x_mb - h_y_m;
            let after_classical = nd1 - h_x_mb;
            let terminal = nd1 + cd1;
            steps.extend([
                Step::new("Holevo bound", "I(M;M̂)", i_m_mhat, Relation::Le, "I(M;XYB)", i_m_xyb),
                Step::new("no-signalling", "I(M;XYB)", i_m_xyb, Relation::Eq, "I(M;XY|B)", cmi),
                Step::new("conditional MI", "I(M;XY|B)", cmi, Relation::Eq, "H(XY|B)-H(XY|MB)", h_xy_b - h_xy_mb),
                Step::new(
                    "dimension + chain rule",
                    "H(XY|B)-H(XY|MB)",
                    h_xy_b - h_xy_mb,
                    Relation::Le,
                    "(n-d+1)-H(X|MB)-H(Y|XMB)",
                    after_dim,
                ),
                Step::new("conditioning", "H(XY|B)", h_xy_b, Relation::Le, "H(XY)", h_xy).witness(),
                Step::new("dimension", "H(XY)", h_xy, Relation::Le, "log_q|XY|", size_xy).witness(),
                Step::new(
                    "encoder independence",
                    "(n-d+1)-H(X|MB)-H(Y|XMB)",
                    after_dim,
                    Relation::Eq,
                    "(n-d+1)-H(X|MB)-H(Y|M)",
                    after_indep,
                ),
                Step::new(
                    "classical conditioning",
                    "(n-d+1)-H(X|MB)-H(Y|M)",
                    after_indep,
                    Relation::Le,
                    "(n-d+1)-H(X|MB)",
                    after_classical,
                ),
                Step::new(
                    "weak monotonicity",
                    "(n-d+1)-H(X|MB)",
                    after_classical,
                    Relation::Le,
                    "(n-d+1)+(c-d+1)",
                    terminal,
                ),
                Step::new("dimension", "-H(X|MB)", -h_x_mb, Relation::Le, "log_q|X|", size_x).witness(),
                Step::new(
                    "bound value",
                    "(n-d+1)+(c-d+1)",
                    terminal,
                    Relation::Eq,
                    "n+c-2d+2",
                    rational::to_f64(&bound),
                ),
            ]);
            terminal
        }
        Chain::Poor => {
            let eyb = subset_entropies(&ens.states, &join(&[&y, &b]), base)?;
            let ey = subset_entropies(&ens.states, &y, base)?;
            let i_m_yb = eyb.averaged - eyb.conditional;
            let cmi = i_m_yb - i_m_b;
            let h_y_b = eyb.averaged - eb.averaged;
            let h_y_mb = eyb.conditional - eb.conditional;
            let h_y_m = ey.conditional;
            let h_y = ey.averaged;
            let size_y = inst.j_set.len() as f64;
            for (name, v) in [
                ("I(M;YB)", i_m_yb),
                ("I(M;Y|B)", cmi),
                ("H(Y|B)", h_y_b),
                ("H(Y|MB)", h_y_mb),
                ("H(Y|M)", h_y_m),
                ("H(Y)", h_y),
            ] {
                values.insert(name, v);
            }
            steps.extend([
                Step::new("Holevo bound", "I(M;M̂)", i_m_mhat, Relation::Le, "I(M;YB)", i_m_yb),
                Step::new("no-signalling", "I(M;YB)", i_m_yb, Relation::Eq, "I(M;Y|B)", cmi),
                Step::new("conditional MI", "I(M;Y|B)", cmi, Relation::Eq, "H(Y|B)-H(Y|MB)", h_y_b - h_y_mb),
                Step::new("dimension", "H(Y|B)-H(Y|MB)", h_y_b - h_y_mb, Relation::Le, "(n-d+1)-H(Y|MB)", nd1 - h_y_mb),
                Step::new("conditioning", "H(Y|B)", h_y_b, Relation::Le, "H(Y)", h_y).witness(),
                Step::new("dimension", "H(Y)", h_y, Relation::Le, "log_q|Y|", size_y).witness(),
                Step::new(
                    "memory independence",
                    "(n-d+1)-H(Y|MB)",
                    nd1 - h_y_mb,
                    Relation::Eq,
                    "(n-d+1)-H(Y|M)",
                    nd1 - h_y_m,
                ),
                Step::new("classical conditioning", "(n-d+1)-H(Y|M)", nd1 - h_y_m, Relation::Le, "n-d+1", nd1),
                Step::new("bound value", "n-d+1", nd1, Relation::Eq, "n-d+1", rational::to_f64(&bound)),
            ]);
            nd1
        }
    };
    let within = Step::new("rate within bound", "k", k, Relation::Le, "terminal", terminal);
    steps.push(within);
    let overall = steps.iter().all(|s| s.holds);
    Ok(StepReport {
        schema: SCHEMA_VERSION,
        code_params: params,
        chain: inst.chain.number(),
        i_set: inst.i_set.iter().map(|p| p + 1).collect(),
        j_set: inst.j_set.iter().map(|p| p + 1).collect(),
        erased: inst.erased().iter().map(|p| p + 1).collect(),
        messages: ens.states.len(),
        values,
        steps,
        terminal,
        bound,
        overall,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct NoSignallingReport {
    pub messages_checked: usize,
    /// Largest max-norm distance of a tensor factor of `σ_m^B` from the
    /// maximally mixed state on its slots.
    pub max_deviation: f64,
    pub holds: bool,
}

/// Checks that Bob's reduced state is `I / q^c` for every message (or a
/// seeded sample of [`MAX_AUDIT_MESSAGES`] when the space is larger). The
/// reduced state is a product, so each factor is compared separately and
/// Bob's register may exceed the dense cap.
pub fn check_no_signaling(code: &EaccCode) -> Result<NoSignallingReport, AuditError> {
    use rand::{Rng, SeedableRng};
    let b = code.bob_slots();
    let q_bar = code.params().q_bar;
    let dits = code.message_dits();
    let messages: Vec<Vec<u32>> = match code.message_space() {
        Some(s) if s <= MAX_AUDIT_MESSAGES => (0..s).map(|i| message_from_index(i, q_bar, dits)).collect(),
        _ => {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
            (0..MAX_AUDIT_MESSAGES).map(|_| (0..dits).map(|_| rng.random_range(0..q_bar)).collect()).collect()
        }
    };
    let prepared = code.prepare()?;
    let deviations = messages
        .par_iter()
        .map(|m| -> Result<f64, AuditError> {
            let state = code.encode_prepared(&prepared, m)?;
            let factors = densim::reduced_factors(&state, &b)?;
            Ok(factors
                .iter()
                .map(|(_, rho)| rho.max_norm_distance(&DensityMatrix::maximally_mixed(rho.dims().to_vec())))
                .fold(0.0, f64::max))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let max_deviation = deviations.into_iter().fold(0.0, f64::max);
    Ok(NoSignallingReport { messages_checked: messages.len(), max_deviation, holds: max_deviation <= TOLERANCE })
}
