//! Entanglement-assisted classical codes for the quantum erasure channel.
//!
//! Every construction here is built from the same pieces:
//!
//! * an *unassisted* subcode writes an MDS codeword into computational basis
//!   states, one symbol per channel sub-slot;
//! * a *superdense* subcode writes two MDS codewords `y`, `y'` into the
//!   displacement `X^{y_i} Z^{y'_i}` of the pair whose Alice half sits in
//!   channel sub-slot `i`;
//! * a *separate* subcode spreads one long MDS codeword over the positions,
//!   two coordinates per entangled position and one per plain position.
//!
//! Each channel use `Q_i` is split into `r` sub-slots of dimension `q̄`, so the
//! channel dimension is `q = q̄^r`. Subcodes occupy one sub-slot column each
//! and never interact (space sharing). Before encoding, Alice's memory halves
//! are moved into channel sub-slots according to a [`RearrangeSchedule`].
//!
//! Rates are exact: `k = (total q̄-dits) / r`.

use std::fmt;
use std::sync::Arc;

use itertools::Itertools;
use num_integer::Integer;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{self, BoundsError};
use crate::gf::{prime_power, Field, FieldSpec, GfError};
use crate::mds::{self, ErasedWord, GeneratorMatrix, MdsError};
use crate::qsym::{MeasurementOutcome, Owner, QsymError, SlotLayout, SymbolicState};
use crate::rational::Rational;
use crate::SCHEMA_VERSION;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodeError {
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Field(#[from] GfError),
    #[error(transparent)]
    Mds(#[from] MdsError),
    #[error(transparent)]
    Qsym(#[from] QsymError),
    #[error("field GF({order}) is too small: {why}")]
    FieldTooSmall { order: u32, why: String },
    #[error("schedule needs n | c·r, got n = {n}, c = {c}, r = {r}")]
    Divisibility { n: usize, c: usize, r: usize },
    #[error("channel dimension q = {q} is too small for (n, d, c) = ({n}, {d}, {c})")]
    QTooSmall { q: u128, n: usize, d: usize, c: usize },
    #[error("message has {found} dits, the code carries {expected}")]
    MessageLength { expected: usize, found: usize },
    #[error("message dit {value} is not below q̄ = {q_bar}")]
    MessageValue { value: u32, q_bar: u32 },
    #[error("erasure pattern has {found} positions, at most d - 1 = {max} are allowed")]
    PatternSize { found: usize, max: usize },
    #[error("erasure position {pos} is outside [0, {n})")]
    PatternPosition { pos: usize, n: usize },
    #[error("malformed code: {0}")]
    Malformed(String),
}

/// What the code is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodeKind {
    Unassisted,
    Superdense,
    Spaceshared,
    Separate,
}

impl fmt::Display for CodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CodeKind::Unassisted => "unassisted",
            CodeKind::Superdense => "superdense",
            CodeKind::Spaceshared => "spaceshared",
            CodeKind::Separate => "separate",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubcodeKind {
    Unassisted,
    Superdense,
    Separate,
}

/// `[n, k, d; c]_q` with `q = q̄^r` and `k` in base-`q` dits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeParams {
    pub n: usize,
    pub d: usize,
    pub c: usize,
    pub q_bar: u32,
    pub r: u32,
    #[serde(with = "crate::rational::as_string")]
    pub k: Rational,
}

impl CodeParams {
    /// `q̄^r`, if it fits.
    pub fn q(&self) -> Option<u128> {
        (self.q_bar as u128).checked_pow(self.r)
    }

    pub fn q_display(&self) -> String {
        match self.q() {
            Some(q) => q.to_string(),
            None => format!("{}^{}", self.q_bar, self.r),
        }
    }

    /// Natural log of `q`, for base-`q` entropies.
    pub fn ln_q(&self) -> f64 {
        self.r as f64 * (self.q_bar as f64).ln()
    }
}

impl fmt::Display for CodeParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{},{};{}]_{}", self.n, self.k, self.d, self.c, self.q_display())
    }
}

/// Parameters of the space-sharing construction for `(n, d, c)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SpaceShareParams {
    pub r: u32,
    pub l1: u32,
    pub l2: u32,
    pub k1: usize,
    pub k2: usize,
    pub q_bar: u32,
    pub q: Option<u128>,
    #[serde(with = "crate::rational::as_string")]
    pub k: Rational,
}

/// Smallest power of two that is at least `max(n, 2)`.
pub fn default_q_bar(n: usize) -> u32 {
    (n.max(2) as u32).next_power_of_two()
}

pub fn params_theorem1(n: usize, d: usize, c: usize) -> Result<SpaceShareParams, CodeError> {
    bounds::check_admissible(n as i64, d as i64, c as i64)?;
    let r = n / n.gcd(&c);
    let l1 = (n - c) * r / n;
    let l2 = c * r / n;
    let k1 = n + 1 - d;
    let k2 = 2 * k1;
    let q_bar = default_q_bar(n);
    let k = Rational::new((k1 * l1 + k2 * l2) as i64, r as i64);
    let bound = bounds::eacc_singleton(n as i64, d as i64, c as i64)?.value;
    if k != bound {
        return Err(CodeError::Malformed(format!("space-shared rate {k} differs from {bound}")));
    }
    Ok(SpaceShareParams {
        r: r as u32,
        l1: l1 as u32,
        l2: l2 as u32,
        k1,
        k2,
        q_bar,
        q: (q_bar as u128).checked_pow(r as u32),
        k,
    })
}

/// One rearrangement move `A_{block, sub} → Q_{position, sub}` (zero-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Assignment {
    pub alice: (usize, usize),
    pub channel: (usize, usize),
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Q{},{}←A{},{}", self.channel.0 + 1, self.channel.1 + 1, self.alice.0 + 1, self.alice.1 + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RearrangeSchedule {
    pub assignment: Vec<Assignment>,
}

impl RearrangeSchedule {
    /// Alice sub-slot feeding channel sub-slot `(position, sub)`, if any.
    pub fn source_of(&self, position: usize, sub: usize) -> Option<(usize, usize)> {
        self.assignment.iter().find(|a| a.channel == (position, sub)).map(|a| a.alice)
    }

    pub fn entangled_at(&self, position: usize) -> usize {
        self.assignment.iter().filter(|a| a.channel.0 == position).count()
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }
}

/// Spreads the `c·r` Alice sub-slots uniformly over the last `ℓ₂ = c·r/n`
/// sub-slot rows: Alice sub-slots are taken block by block, channel sub-slots
/// position by position.
pub fn rearrange_schedule(n: usize, c: usize, r: usize) -> Result<RearrangeSchedule, CodeError> {
    if n == 0 || !(c * r).is_multiple_of(n) || c > n {
        return Err(CodeError::Divisibility { n, c, r });
    }
    let l2 = c * r / n;
    let l1 = r - l2;
    let alice = (0..c).cartesian_product(0..r);
    let channel = (0..n).cartesian_product(l1..r);
    Ok(RearrangeSchedule {
        assignment: alice.zip(channel).map(|(alice, channel)| Assignment { alice, channel }).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subcode {
    pub kind: SubcodeKind,
    pub generator: GeneratorMatrix,
    /// Channel sub-slot column this subcode writes to.
    pub column: usize,
}

impl Subcode {
    /// Message dits consumed.
    pub fn dits(&self) -> usize {
        match self.kind {
            SubcodeKind::Superdense => 2 * self.generator.k(),
            SubcodeKind::Unassisted | SubcodeKind::Separate => self.generator.k(),
        }
    }
}

/// A set of `d - 1` erased channel positions (zero-based, sorted).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ErasurePattern {
    n: usize,
    erased: Vec<usize>,
}

impl ErasurePattern {
    pub fn new(n: usize, positions: impl IntoIterator<Item = usize>) -> Result<Self, CodeError> {
        let erased: Vec<usize> = positions.into_iter().sorted().dedup().collect();
        if let Some(&pos) = erased.iter().find(|&&p| p >= n) {
            return Err(CodeError::PatternPosition { pos, n });
        }
        Ok(ErasurePattern { n, erased })
    }

    /// Every pattern of the given size, in lexicographic order.
    pub fn all(n: usize, size: usize) -> Vec<ErasurePattern> {
        (0..n).combinations(size).map(|erased| ErasurePattern { n, erased }).collect()
    }

    pub fn positions(&self) -> &[usize] {
        &self.erased
    }

    pub fn len(&self) -> usize {
        self.erased.len()
    }

    pub fn is_empty(&self) -> bool {
        self.erased.is_empty()
    }

    pub fn contains(&self, pos: usize) -> bool {
        self.erased.binary_search(&pos).is_ok()
    }

    /// One-based set notation, e.g. `{1,3}`.
    pub fn display_one_based(&self) -> String {
        format!("{{{}}}", self.erased.iter().map(|p| p + 1).join(","))
    }
}

/// A complete code: layout, wiring, subcodes, encoder and decoder.
#[derive(Debug, Clone)]
pub struct EaccCode {
    kind: CodeKind,
    params: CodeParams,
    field: Field,
    layout: Arc<SlotLayout>,
    schedule: RearrangeSchedule,
    subcodes: Vec<Subcode>,
    /// Alice memory blocks (may exceed the number actually wired).
    blocks: usize,
    /// Alice sub-slot feeding each channel sub-slot, by channel slot index.
    feeds: Vec<Option<(usize, usize)>>,
}

impl EaccCode {
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        kind: CodeKind,
        n: usize,
        d: usize,
        c: usize,
        r: usize,
        field: Field,
        schedule: RearrangeSchedule,
        subcodes: Vec<Subcode>,
    ) -> Result<Self, CodeError> {
        bounds::check_admissible(n as i64, d as i64, c as i64)?;
        let bad = |msg: String| Err(CodeError::Malformed(msg));
        if r == 0 {
            return bad("r must be positive".into());
        }
        let mut columns = vec![false; r];
        for sc in &subcodes {
            if sc.generator.field() != &field {
                return bad("subcode generator over a different field".into());
            }
            if sc.column >= r || columns[sc.column] {
                return bad(format!("subcode column {} repeated or out of range", sc.column));
            }
            columns[sc.column] = true;
            let expected_len = match sc.kind {
                SubcodeKind::Separate => n + c,
                _ => n,
            };
            if sc.generator.n() != expected_len {
                return bad(format!("subcode in column {} has length {}", sc.column, sc.generator.n()));
            }
            if sc.kind == SubcodeKind::Separate && r != 1 {
                return bad("separate subcodes need r = 1".into());
            }
        }
        let mut seen_alice = std::collections::HashSet::new();
        let mut seen_channel = std::collections::HashSet::new();
        for a in &schedule.assignment {
            if a.alice.0 >= c || a.alice.1 >= r || a.channel.0 >= n || a.channel.1 >= r {
                return bad(format!("schedule entry {a} out of range"));
            }
            if !seen_alice.insert(a.alice) || !seen_channel.insert(a.channel) {
                return bad(format!("schedule entry {a} is not one-to-one"));
            }
        }
        for sc in &subcodes {
            let needs_pair = |i: usize| match sc.kind {
                SubcodeKind::Unassisted => false,
                SubcodeKind::Superdense => true,
                SubcodeKind::Separate => i < c,
            };
            for i in 0..n {
                let wired = schedule.source_of(i, sc.column).is_some();
                if wired != needs_pair(i) {
                    return bad(format!("position {} of column {} is miswired", i + 1, sc.column + 1));
                }
            }
        }
        let total: usize = subcodes.iter().map(Subcode::dits).sum();
        let k = Rational::new(total as i64, r as i64);
        let spec = field.spec();
        let params = CodeParams { n, d, c, q_bar: spec.order, r: r as u32, k };
        let owners = (0..n)
            .cartesian_product(0..r)
            .map(|(position, sub)| Owner::Channel { position, sub })
            .chain((0..c).cartesian_product(0..r).map(|(block, sub)| Owner::AliceMemory { block, sub }))
            .chain((0..c).cartesian_product(0..r).map(|(block, sub)| Owner::BobMemory { block, sub }));
        let layout = Arc::new(SlotLayout::from_owners(spec.p, spec.m, owners)?);
        let mut feeds = vec![None; n * r];
        for a in &schedule.assignment {
            feeds[a.channel.0 * r + a.channel.1] = Some(a.alice);
        }
        Ok(EaccCode { kind, params, field, layout, schedule, subcodes, blocks: c, feeds })
    }

    pub fn kind(&self) -> CodeKind {
        self.kind
    }

    pub fn params(&self) -> &CodeParams {
        &self.params
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn layout(&self) -> &Arc<SlotLayout> {
        &self.layout
    }

    pub fn schedule(&self) -> &RearrangeSchedule {
        &self.schedule
    }

    pub fn subcodes(&self) -> &[Subcode] {
        &self.subcodes
    }

    /// Total message length in q̄-dits.
    pub fn message_dits(&self) -> usize {
        self.subcodes.iter().map(Subcode::dits).sum()
    }

    /// `|ℳ| = q̄^{dits}`, if it fits in a `u128`.
    pub fn message_space(&self) -> Option<u128> {
        (self.params.q_bar as u128).checked_pow(self.message_dits() as u32)
    }

    /// Offset of each subcode's dits in the message.
    pub fn subcode_offsets(&self) -> Vec<usize> {
        self.subcodes
            .iter()
            .scan(0, |acc, sc| {
                let start = *acc;
                *acc += sc.dits();
                Some(start)
            })
            .collect()
    }

    pub fn channel_slot(&self, position: usize, sub: usize) -> usize {
        position * self.params.r as usize + sub
    }

    pub fn alice_slot(&self, block: usize, sub: usize) -> usize {
        let r = self.params.r as usize;
        self.params.n * r + block * r + sub
    }

    pub fn bob_slot(&self, block: usize, sub: usize) -> usize {
        let r = self.params.r as usize;
        self.params.n * r + self.blocks * r + block * r + sub
    }

    /// Slot indices of `Q_i` for the given positions.
    pub fn channel_slots(&self, positions: &[usize]) -> Vec<usize> {
        let r = self.params.r as usize;
        positions.iter().flat_map(|&i| (0..r).map(move |j| (i, j))).map(|(i, j)| self.channel_slot(i, j)).collect()
    }

    /// Slot indices of all of Bob's memory, `B = B_1 ⋯ B_c`.
    pub fn bob_slots(&self) -> Vec<usize> {
        let r = self.params.r as usize;
        (0..self.blocks).cartesian_product(0..r).map(|(s, t)| self.bob_slot(s, t)).collect()
    }

    /// Entanglement distribution followed by the rearrangement.
    pub fn prepare(&self) -> Result<SymbolicState, CodeError> {
        let mut state = SymbolicState::new(self.layout.clone());
        let r = self.params.r as usize;
        for (s, t) in (0..self.blocks).cartesian_product(0..r) {
            state.make_bell_pair(self.alice_slot(s, t), self.bob_slot(s, t))?;
        }
        for a in &self.schedule.assignment {
            state.swap(self.alice_slot(a.alice.0, a.alice.1), self.channel_slot(a.channel.0, a.channel.1))?;
        }
        Ok(state)
    }

    fn check_message(&self, msg: &[u32]) -> Result<(), CodeError> {
        if msg.len() != self.message_dits() {
            return Err(CodeError::MessageLength { expected: self.message_dits(), found: msg.len() });
        }
        let q_bar = self.params.q_bar;
        if let Some(&value) = msg.iter().find(|&&v| v >= q_bar) {
            return Err(CodeError::MessageValue { value, q_bar });
        }
        Ok(())
    }

    /// Writes one subcode's share of the message into a prepared state.
    pub fn encode_subcode(&self, state: &mut SymbolicState, idx: usize, dits: &[u32]) -> Result<(), CodeError> {
        let sc = &self.subcodes[idx];
        if dits.len() != sc.dits() {
            return Err(CodeError::MessageLength { expected: sc.dits(), found: dits.len() });
        }
        let g = &sc.generator;
        let col = sc.column;
        match sc.kind {
            SubcodeKind::Unassisted => {
                for (i, x) in mds::mds_encode(dits, g)?.into_iter().enumerate() {
                    state.set_classical(self.channel_slot(i, col), x)?;
                }
            }
            SubcodeKind::Superdense => {
                let (u, u2) = dits.split_at(g.k());
                let y = mds::mds_encode(u, g)?;
                let y2 = mds::mds_encode(u2, g)?;
                for i in 0..self.params.n {
                    state.apply_displacement(self.channel_slot(i, col), y[i], y2[i])?;
                }
            }
            SubcodeKind::Separate => {
                let w = mds::mds_encode(dits, g)?;
                let c = self.params.c;
                for i in 0..self.params.n {
                    let slot = self.channel_slot(i, col);
                    if i < c {
                        state.apply_displacement(slot, w[2 * i], w[2 * i + 1])?;
                    } else {
                        state.set_classical(slot, w[c + i])?;
                    }
                }
            }
        }
        Ok(())
    }

    /// The encoder: the joint state of Alice's channel systems and Bob's memory.
    pub fn encode(&self, msg: &[u32]) -> Result<SymbolicState, CodeError> {
        self.encode_prepared(&self.prepare()?, msg)
    }

    /// As [`EaccCode::encode`], starting from a copy of a state returned by
    /// [`EaccCode::prepare`].
    pub fn encode_prepared(&self, prepared: &SymbolicState, msg: &[u32]) -> Result<SymbolicState, CodeError> {
        self.check_message(msg)?;
        let mut state = prepared.clone();
        for (idx, off) in self.subcode_offsets().into_iter().enumerate() {
            let len = self.subcodes[idx].dits();
            self.encode_subcode(&mut state, idx, &msg[off..off + len])?;
        }
        Ok(state)
    }

    /// Sends every sub-slot of the listed positions through the erasure.
    pub fn erase(&self, state: &mut SymbolicState, positions: &[usize]) -> Result<(), CodeError> {
        state.erase(&self.channel_slots(positions))?;
        Ok(())
    }

    /// Measures the surviving systems of one subcode and erasure-decodes.
    pub fn decode_subcode(
        &self,
        state: &mut SymbolicState,
        idx: usize,
        erased: &[bool],
    ) -> Result<Vec<u32>, CodeError> {
        let sc = &self.subcodes[idx];
        let g = &sc.generator;
        let n = self.params.n;
        let col = sc.column;
        let classical = |state: &SymbolicState, slot: usize| -> Result<u32, CodeError> {
            match state.computational_measure(slot)? {
                MeasurementOutcome::Computational { x } => Ok(x),
                MeasurementOutcome::Bell { .. } => unreachable!(),
            }
        };
        let bell = |state: &mut SymbolicState, i: usize| -> Result<(u32, u32), CodeError> {
            let (s, t) = self.feeds[self.channel_slot(i, col)]
                .ok_or_else(|| CodeError::Malformed(format!("Q{},{} has no partner", i + 1, col + 1)))?;
            match state.bell_measure(self.channel_slot(i, col), self.bob_slot(s, t))? {
                MeasurementOutcome::Bell { x, z } => Ok((x, z)),
                MeasurementOutcome::Computational { .. } => unreachable!(),
            }
        };
        match sc.kind {
            SubcodeKind::Unassisted => {
                let mut word = ErasedWord::all_erased(n);
                for i in (0..n).filter(|&i| !erased[i]) {
                    word.set(i, classical(state, self.channel_slot(i, col))?);
                }
                Ok(mds::mds_erasure_decode(&word, g)?)
            }
            SubcodeKind::Superdense => {
                let mut wx = ErasedWord::all_erased(n);
                let mut wz = ErasedWord::all_erased(n);
                for i in (0..n).filter(|&i| !erased[i]) {
                    let (x, z) = bell(state, i)?;
                    wx.set(i, x);
                    wz.set(i, z);
                }
                let mut out = mds::mds_erasure_decode(&wx, g)?;
                out.extend(mds::mds_erasure_decode(&wz, g)?);
                Ok(out)
            }
            SubcodeKind::Separate => {
                let c = self.params.c;
                let mut w = ErasedWord::all_erased(n + c);
                for i in (0..n).filter(|&i| !erased[i]) {
                    if i < c {
                        let (x, z) = bell(state, i)?;
                        w.set(2 * i, x);
                        w.set(2 * i + 1, z);
                    } else {
                        w.set(c + i, classical(state, self.channel_slot(i, col))?);
                    }
                }
                Ok(mds::mds_erasure_decode(&w, g)?)
            }
        }
    }

    /// Decodes with an arbitrary erased set, without the `d - 1` size rule.
    pub fn decode_with_erasures(&self, mut state: SymbolicState, positions: &[usize]) -> Result<Vec<u32>, CodeError> {
        let mut erased = vec![false; self.params.n];
        for &p in positions {
            if p >= self.params.n {
                return Err(CodeError::PatternPosition { pos: p, n: self.params.n });
            }
            erased[p] = true;
        }
        let mut msg = Vec::with_capacity(self.message_dits());
        for idx in 0..self.subcodes.len() {
            msg.extend(self.decode_subcode(&mut state, idx, &erased)?);
        }
        Ok(msg)
    }

    /// The decoder for pattern `ℰ`. Patterns smaller than `d - 1` are topped
    /// up by discarding the highest-indexed survivors.
    pub fn decode(&self, mut state: SymbolicState, pattern: &ErasurePattern) -> Result<Vec<u32>, CodeError> {
        let (n, d) = (self.params.n, self.params.d);
        if pattern.n != n {
            return Err(CodeError::Malformed(format!("pattern for n = {}, code has n = {n}", pattern.n)));
        }
        if pattern.len() > d - 1 {
            return Err(CodeError::PatternSize { found: pattern.len(), max: d - 1 });
        }
        let mut erased = pattern.erased.clone();
        let extra: Vec<usize> = (0..n).rev().filter(|p| !pattern.contains(*p)).take(d - 1 - pattern.len()).collect();
        self.erase(&mut state, &extra)?;
        erased.extend(extra);
        self.decode_with_erasures(state, &erased)
    }

    /// Encode, erase, decode.
    pub fn transmit(&self, msg: &[u32], pattern: &ErasurePattern) -> Result<Vec<u32>, CodeError> {
        let mut state = self.encode(msg)?;
        self.erase(&mut state, pattern.positions())?;
        self.decode(state, pattern)
    }

    pub fn to_document(&self) -> CodeDocument {
        CodeDocument {
            schema: SCHEMA_VERSION.to_string(),
            kind: self.kind,
            params: self.params,
            q: self.params.q(),
            field: self.field.spec().clone(),
            schedule: self.schedule.assignment.clone(),
            subcodes: self
                .subcodes
                .iter()
                .map(|sc| SubcodeDocument {
                    kind: sc.kind,
                    column: sc.column,
                    n: sc.generator.n(),
                    k: sc.generator.k(),
                    generator: sc.generator.rows().to_vec(),
                })
                .collect(),
        }
    }

    pub fn from_document(doc: &CodeDocument) -> Result<Self, CodeError> {
        if doc.schema != SCHEMA_VERSION {
            return Err(CodeError::Malformed(format!("unsupported schema {:?}", doc.schema)));
        }
        let field = Field::from_spec(&doc.field)?;
        let subcodes = doc
            .subcodes
            .iter()
            .map(|s| {
                let generator = GeneratorMatrix::from_rows(&field, s.n, s.generator.clone())?;
                if generator.k() != s.k {
                    return Err(CodeError::Malformed(format!(
                        "subcode declares k = {} but has {} rows",
                        s.k,
                        generator.k()
                    )));
                }
                Ok(Subcode { kind: s.kind, generator, column: s.column })
            })
            .collect::<Result<Vec<_>, CodeError>>()?;
        let p = doc.params;
        let schedule = RearrangeSchedule { assignment: doc.schedule.clone() };
        let code = EaccCode::assemble(doc.kind, p.n, p.d, p.c, p.r as usize, field, schedule, subcodes)?;
        if code.params != doc.params {
            return Err(CodeError::Malformed(format!("declared {} but the subcodes give {}", doc.params, code.params)));
        }
        Ok(code)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("code documents serialise")
    }

    pub fn from_json(s: &str) -> Result<Self, CodeError> {
        let doc: CodeDocument = serde_json::from_str(s).map_err(|e| CodeError::Malformed(e.to_string()))?;
        EaccCode::from_document(&doc)
    }
}

/// Serialised form of an [`EaccCode`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeDocument {
    pub schema: String,
    pub kind: CodeKind,
    pub params: CodeParams,
    /// `q̄^r`, informational.
    pub q: Option<u128>,
    pub field: FieldSpec,
    pub schedule: Vec<Assignment>,
    pub subcodes: Vec<SubcodeDocument>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubcodeDocument {
    pub kind: SubcodeKind,
    pub column: usize,
    pub n: usize,
    pub k: usize,
    pub generator: Vec<Vec<u32>>,
}

fn generator_for(n: usize, k: usize, field: &Field) -> Result<GeneratorMatrix, CodeError> {
    mds::mds_generator(n, k, field).map_err(|e| match e {
        MdsError::NoMdsCode { .. } | MdsError::LengthExceedsField { .. } => {
            CodeError::FieldTooSmall { order: field.order(), why: format!("no [{n}, {k}] MDS code") }
        }
        other => other.into(),
    })
}

/// `[n, n-d+1, d; 0]` from a classical MDS code in the computational basis.
pub fn build_unassisted(n: usize, d: usize, field: &Field) -> Result<EaccCode, CodeError> {
    bounds::check_admissible(n as i64, d as i64, 0)?;
    let g = generator_for(n, n + 1 - d, field)?;
    let subcodes = vec![Subcode { kind: SubcodeKind::Unassisted, generator: g, column: 0 }];
    EaccCode::assemble(CodeKind::Unassisted, n, d, 0, 1, field.clone(), RearrangeSchedule::default(), subcodes)
}

/// `[n, 2(n-d+1), d; n]` by superdense coding two MDS codewords on `n` pairs.
pub fn build_superdense(n: usize, d: usize, field: &Field) -> Result<EaccCode, CodeError> {
    bounds::check_admissible(n as i64, d as i64, n as i64)?;
    let g = generator_for(n, n + 1 - d, field)?;
    let subcodes = vec![Subcode { kind: SubcodeKind::Superdense, generator: g, column: 0 }];
    let schedule = rearrange_schedule(n, n, 1)?;
    EaccCode::assemble(CodeKind::Superdense, n, d, n, 1, field.clone(), schedule, subcodes)
}

/// The space-shared code saturating `k = (1 + c/n)(n - d + 1)`.
///
/// Uses q̄ = [`default_q_bar`] unless a field is supplied.
pub fn build_spaceshared(n: usize, d: usize, c: usize, field: Option<&Field>) -> Result<EaccCode, CodeError> {
    let t = params_theorem1(n, d, c)?;
    let field = match field {
        Some(f) => f.clone(),
        None => Field::with_order(t.q_bar)?,
    };
    let g = generator_for(n, t.k1, &field)?;
    let r = t.r as usize;
    let subcodes = (0..r)
        .map(|column| Subcode {
            kind: if column < t.l1 as usize { SubcodeKind::Unassisted } else { SubcodeKind::Superdense },
            generator: g.clone(),
            column,
        })
        .collect();
    let schedule = rearrange_schedule(n, c, r)?;
    let code = EaccCode::assemble(CodeKind::Spaceshared, n, d, c, r, field, schedule, subcodes)?;
    debug_assert_eq!(code.params.k, t.k);
    Ok(code)
}

/// Result of [`build_asymptotic`].
#[derive(Debug, Clone)]
pub struct AsymptoticCode {
    pub code: EaccCode,
    pub q: u128,
    pub q_bar: u32,
    /// `q̃ = q̄^r <= q`
    pub q_tilde: u128,
    /// Rate measured in base-`q̃` dits.
    pub k_in_q_tilde: Rational,
    /// `log_q q̃`
    pub utilisation: f64,
    /// `log_q(q̃) · k_in_q_tilde`
    pub k_achieved: f64,
    /// Set when `q̃ = q` and the rate is exactly rational.
    pub k_achieved_exact: Option<Rational>,
    /// `(1 - r log_q 2)(1 + c/n)(n - d + 1)`
    pub k_lower_bound: f64,
}

/// Space-shared code for a channel of arbitrary dimension `q`, using the
/// largest power-of-two `q̄` with `q̄^r <= q`.
pub fn build_asymptotic(n: usize, d: usize, c: usize, q: u128) -> Result<AsymptoticCode, CodeError> {
    let t = params_theorem1(n, d, c)?;
    let r = t.r;
    let too_small = CodeError::QTooSmall { q, n, d, c };
    let mut bits = 0u32;
    while 1u128.checked_shl((bits + 1) * r).is_some_and(|v| v <= q) && (bits + 1) * r < 128 {
        bits += 1;
    }
    if bits == 0 || bits > 16 {
        return Err(if bits == 0 {
            too_small
        } else {
            CodeError::FieldTooSmall { order: 0, why: format!("q̄ = 2^{bits} is outside the field table") }
        });
    }
    let q_bar = 1u32 << bits;
    if (q_bar as usize) < n {
        return Err(too_small);
    }
    let field = Field::new(2, bits)?;
    let code = build_spaceshared(n, d, c, Some(&field))?;
    let q_tilde = 1u128 << (bits * r);
    let log2_q = (q as f64).log2();
    let utilisation = (bits * r) as f64 / log2_q;
    let k_in_q_tilde = code.params.k;
    let k_exact = crate::rational::to_f64(&k_in_q_tilde);
    let k_achieved = utilisation * k_exact;
    let k_lower_bound = (1.0 - r as f64 / log2_q) * k_exact;
    if k_achieved + 1e-12 < k_lower_bound {
        return Err(CodeError::Malformed(format!("rate {k_achieved} below the analytic bound {k_lower_bound}")));
    }
    Ok(AsymptoticCode {
        code,
        q,
        q_bar,
        q_tilde,
        k_in_q_tilde,
        utilisation,
        k_achieved,
        k_achieved_exact: (q_tilde == q).then_some(k_in_q_tilde),
        k_lower_bound,
    })
}

/// A code with separate encoders: encoder `i <= c` sees only the message and
/// `A_i`, the others only the message.
///
/// For `d - 1 <= c` one MDS code of length `n + c` and dimension
/// `n + c - 2d + 2` is laid out two coordinates per entangled position
/// (superdense on `A_i B_i`) and one per plain position; `d - 1` erased
/// positions remove at most `2(d - 1)` coordinates. For `c < d - 1` the
/// entanglement is left unused and a plain `[n, n - d + 1]` MDS code is sent.
pub fn build_separate(n: usize, d: usize, c: usize, field: &Field) -> Result<EaccCode, CodeError> {
    bounds::check_admissible(n as i64, d as i64, c as i64)?;
    if d - 1 <= c {
        let g = generator_for(n + c, n + c + 2 - 2 * d, field)?;
        let schedule =
            RearrangeSchedule { assignment: (0..c).map(|i| Assignment { alice: (i, 0), channel: (i, 0) }).collect() };
        let subcodes = vec![Subcode { kind: SubcodeKind::Separate, generator: g, column: 0 }];
        EaccCode::assemble(CodeKind::Separate, n, d, c, 1, field.clone(), schedule, subcodes)
    } else {
        let g = generator_for(n, n + 1 - d, field)?;
        let subcodes = vec![Subcode { kind: SubcodeKind::Unassisted, generator: g, column: 0 }];
        EaccCode::assemble(CodeKind::Separate, n, d, c, 1, field.clone(), RearrangeSchedule::default(), subcodes)
    }
}

/// [`build_separate`] over the smallest field order, up to 64, that admits
/// it. Small fields keep the dense entropy audit cheap.
pub fn build_separate_smallest(n: usize, d: usize, c: usize) -> Result<EaccCode, CodeError> {
    let mut last = None;
    for order in (2..=64u32).filter(|&q| prime_power(q).is_some()) {
        match build_separate(n, d, c, &Field::with_order(order)?) {
            Ok(code) => return Ok(code),
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("at least one order is tried"))
}

/// Default field for [`build_separate`]: smallest power of two `>= n + c`.
pub fn separate_field(n: usize, c: usize) -> Result<Field, CodeError> {
    Ok(Field::with_order(default_q_bar(n + c))?)
}

/// Message with index `idx` in base-q̄ little-endian order.
pub fn message_from_index(mut idx: u128, q_bar: u32, dits: usize) -> Vec<u32> {
    (0..dits)
        .map(|_| {
            let d = (idx % q_bar as u128) as u32;
            idx /= q_bar as u128;
            d
        })
        .collect()
}
