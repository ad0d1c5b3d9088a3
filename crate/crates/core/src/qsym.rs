//! Exact symbolic simulation of the state family used by the constructions.
//!
//! A register holds slots of dimension `q̄ = p^m`. Each slot is either a
//! computational basis state `|x⟩`, one half of a maximally entangled pair, or
//! erased. A pair carries a displacement `(x, z)` meaning the pair is in
//! `(X^x Z^z ⊗ I)|Φ⟩` with `|Φ⟩ = q̄^{-1/2} Σ_i |i⟩|i⟩`, the operator acting on
//! the pair's first half. For `m > 1` the Paulis act digit-wise on the `m`
//! base-`p` digits: `X^x|j⟩ = |j ⊕ x⟩` and `Z^z|j⟩ = ω^{⟨z, j⟩}|j⟩` with
//! `ω = exp(2πi/p)`. Global phases are dropped.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gf::{digit_add, digit_neg};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QsymError {
    #[error("duplicate slot label {0}")]
    DuplicateLabel(String),
    #[error("slot {0} has dimension below 2")]
    BadDimension(String),
    #[error("no slot labelled {0}")]
    UnknownLabel(String),
    #[error("slot index {0} out of range")]
    UnknownSlot(usize),
    #[error("slot {0} is half of an entangled pair")]
    Entangled(String),
    #[error("slot {0} is erased")]
    Erased(String),
    #[error("slot {0} is not half of an entangled pair")]
    NotEntangled(String),
    #[error("slots {0} and {1} have different dimensions")]
    DimensionMismatch(String, String),
    #[error("value {value} is outside the alphabet of slot {slot} (dimension {dim})")]
    ValueOutOfRange { slot: String, value: u32, dim: u32 },
    #[error("slots {0} and {1} are not the two halves of one pair")]
    NotAPair(String, String),
    #[error("the partner of slot {0} was erased")]
    PartnerErased(String),
    #[error("a slot cannot be paired with itself")]
    SameSlot,
}

/// Who holds a slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Owner {
    /// Channel sub-slot `Q_{position, sub}` (zero-based indices).
    Channel { position: usize, sub: usize },
    /// Bob's memory sub-slot `B_{block, sub}`.
    BobMemory { block: usize, sub: usize },
    /// Alice's memory sub-slot `A_{block, sub}`.
    AliceMemory { block: usize, sub: usize },
}

impl Owner {
    /// Conventional one-based label such as `Q1,2`.
    pub fn label(&self) -> String {
        match *self {
            Owner::Channel { position, sub } => format!("Q{},{}", position + 1, sub + 1),
            Owner::BobMemory { block, sub } => format!("B{},{}", block + 1, sub + 1),
            Owner::AliceMemory { block, sub } => format!("A{},{}", block + 1, sub + 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub label: String,
    /// Characteristic of the digit alphabet.
    pub p: u32,
    /// Number of base-`p` digits; the slot dimension is `p^m`.
    pub m: u32,
    pub owner: Owner,
}

impl Slot {
    pub fn dim(&self) -> u32 {
        self.p.pow(self.m)
    }
}

/// Ordered, uniquely labelled slots.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SlotLayout {
    slots: Vec<Slot>,
    by_label: HashMap<String, usize>,
}

impl SlotLayout {
    pub fn new(slots: Vec<Slot>) -> Result<Self, QsymError> {
        let mut by_label = HashMap::with_capacity(slots.len());
        for (i, s) in slots.iter().enumerate() {
            if s.dim() < 2 {
                return Err(QsymError::BadDimension(s.label.clone()));
            }
            if by_label.insert(s.label.clone(), i).is_some() {
                return Err(QsymError::DuplicateLabel(s.label.clone()));
            }
        }
        Ok(SlotLayout { slots, by_label })
    }

    /// Builds a layout whose labels come from the owners.
    pub fn from_owners(p: u32, m: u32, owners: impl IntoIterator<Item = Owner>) -> Result<Self, QsymError> {
        SlotLayout::new(owners.into_iter().map(|owner| Slot { label: owner.label(), p, m, owner }).collect())
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Result<usize, QsymError> {
        self.by_label.get(label).copied().ok_or_else(|| QsymError::UnknownLabel(label.to_string()))
    }

    pub fn slot(&self, idx: usize) -> &Slot {
        &self.slots[idx]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    First,
    Second,
}

impl Role {
    fn index(self) -> usize {
        match self {
            Role::First => 0,
            Role::Second => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SlotContent {
    Classical(u32),
    BellHalf { pair: usize, role: Role },
    Erased,
}

/// A maximally entangled pair and its accumulated displacement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Pair {
    /// Slot indices of the first and second halves; `None` once erased.
    pub halves: [Option<usize>; 2],
    pub x: u32,
    pub z: u32,
    pub live: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasurementOutcome {
    Computational { x: u32 },
    Bell { x: u32, z: u32 },
}

impl fmt::Display for MeasurementOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeasurementOutcome::Computational { x } => write!(f, "|{x}⟩"),
            MeasurementOutcome::Bell { x, z } => write!(f, "β({x},{z})"),
        }
    }
}

/// A register in the symbolic family.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolicState {
    layout: Arc<SlotLayout>,
    contents: Vec<SlotContent>,
    pairs: Vec<Pair>,
}

impl SymbolicState {
    /// All slots start in `|0⟩`.
    pub fn new(layout: Arc<SlotLayout>) -> Self {
        let contents = vec![SlotContent::Classical(0); layout.len()];
        SymbolicState { layout, contents, pairs: Vec::new() }
    }

    pub fn layout(&self) -> &Arc<SlotLayout> {
        &self.layout
    }

    pub fn content(&self, slot: usize) -> SlotContent {
        self.contents[slot]
    }

    pub fn pair(&self, id: usize) -> &Pair {
        &self.pairs[id]
    }

    pub fn pairs(&self) -> &[Pair] {
        &self.pairs
    }

    /// Slot index of the other half of the pair containing `slot`, if present.
    pub fn partner(&self, slot: usize) -> Option<usize> {
        match self.contents.get(slot)? {
            SlotContent::BellHalf { pair, role } => self.pairs[*pair].halves[1 - role.index()],
            _ => None,
        }
    }

    pub fn index_of(&self, label: &str) -> Result<usize, QsymError> {
        self.layout.index_of(label)
    }

    fn label(&self, slot: usize) -> String {
        self.layout.slot(slot).label.clone()
    }

    fn check(&self, slot: usize) -> Result<(), QsymError> {
        if slot >= self.contents.len() {
            return Err(QsymError::UnknownSlot(slot));
        }
        Ok(())
    }

    pub fn set_classical(&mut self, slot: usize, x: u32) -> Result<(), QsymError> {
        self.check(slot)?;
        let dim = self.layout.slot(slot).dim();
        if x >= dim {
            return Err(QsymError::ValueOutOfRange { slot: self.label(slot), value: x, dim });
        }
        match self.contents[slot] {
            SlotContent::Classical(_) => {
                self.contents[slot] = SlotContent::Classical(x);
                Ok(())
            }
            SlotContent::BellHalf { .. } => Err(QsymError::Entangled(self.label(slot))),
            SlotContent::Erased => Err(QsymError::Erased(self.label(slot))),
        }
    }

    /// Prepares `|Φ⟩` on two classical slots (their values are discarded).
    pub fn make_bell_pair(&mut self, a: usize, b: usize) -> Result<usize, QsymError> {
        self.check(a)?;
        self.check(b)?;
        if a == b {
            return Err(QsymError::SameSlot);
        }
        let (sa, sb) = (self.layout.slot(a), self.layout.slot(b));
        if (sa.p, sa.m) != (sb.p, sb.m) {
            return Err(QsymError::DimensionMismatch(sa.label.clone(), sb.label.clone()));
        }
        for s in [a, b] {
            match self.contents[s] {
                SlotContent::Classical(_) => {}
                SlotContent::BellHalf { .. } => return Err(QsymError::Entangled(self.label(s))),
                SlotContent::Erased => return Err(QsymError::Erased(self.label(s))),
            }
        }
        let id = self.pairs.len();
        self.pairs.push(Pair { halves: [Some(a), Some(b)], x: 0, z: 0, live: true });
        self.contents[a] = SlotContent::BellHalf { pair: id, role: Role::First };
        self.contents[b] = SlotContent::BellHalf { pair: id, role: Role::Second };
        Ok(id)
    }

    /// Applies `X^x Z^z` to the pair half in `slot`.
    pub fn apply_displacement(&mut self, slot: usize, x: u32, z: u32) -> Result<(), QsymError> {
        self.check(slot)?;
        let s = self.layout.slot(slot);
        let (p, dim) = (s.p, s.dim());
        for v in [x, z] {
            if v >= dim {
                return Err(QsymError::ValueOutOfRange { slot: self.label(slot), value: v, dim });
            }
        }
        match self.contents[slot] {
            SlotContent::BellHalf { pair, role } => {
                let rec = &mut self.pairs[pair];
                // (I ⊗ X^x Z^z)|Φ⟩ ∝ (X^{-x} Z^z ⊗ I)|Φ⟩
                let dx = match role {
                    Role::First => x,
                    Role::Second => digit_neg(p, x),
                };
                rec.x = digit_add(p, rec.x, dx);
                rec.z = digit_add(p, rec.z, z);
                Ok(())
            }
            SlotContent::Classical(_) => Err(QsymError::NotEntangled(self.label(slot))),
            SlotContent::Erased => Err(QsymError::Erased(self.label(slot))),
        }
    }

    /// Measures both halves of one pair in the Bell basis; both slots end in `|0⟩`.
    pub fn bell_measure(&mut self, a: usize, b: usize) -> Result<MeasurementOutcome, QsymError> {
        self.check(a)?;
        self.check(b)?;
        if a == b {
            return Err(QsymError::SameSlot);
        }
        let pair_of = |s: usize| match self.contents[s] {
            SlotContent::BellHalf { pair, .. } => Ok(pair),
            SlotContent::Erased => Err(QsymError::Erased(self.label(s))),
            SlotContent::Classical(_) => Err(QsymError::NotEntangled(self.label(s))),
        };
        let (pa, pb) = (pair_of(a)?, pair_of(b)?);
        if pa != pb {
            return Err(QsymError::NotAPair(self.label(a), self.label(b)));
        }
        let rec = self.pairs[pa];
        if rec.halves.iter().any(Option::is_none) {
            return Err(QsymError::PartnerErased(self.label(a)));
        }
        self.pairs[pa].live = false;
        self.contents[a] = SlotContent::Classical(0);
        self.contents[b] = SlotContent::Classical(0);
        Ok(MeasurementOutcome::Bell { x: rec.x, z: rec.z })
    }

    /// Reads a computational basis slot without disturbing it.
    pub fn computational_measure(&self, slot: usize) -> Result<MeasurementOutcome, QsymError> {
        self.check(slot)?;
        match self.contents[slot] {
            SlotContent::Classical(x) => Ok(MeasurementOutcome::Computational { x }),
            SlotContent::BellHalf { .. } => Err(QsymError::Entangled(self.label(slot))),
            SlotContent::Erased => Err(QsymError::Erased(self.label(slot))),
        }
    }

    /// Exchanges the contents of two slots of equal dimension.
    pub fn swap(&mut self, a: usize, b: usize) -> Result<(), QsymError> {
        self.check(a)?;
        self.check(b)?;
        if a == b {
            return Ok(());
        }
        let (sa, sb) = (self.layout.slot(a), self.layout.slot(b));
        if (sa.p, sa.m) != (sb.p, sb.m) {
            return Err(QsymError::DimensionMismatch(sa.label.clone(), sb.label.clone()));
        }
        self.contents.swap(a, b);
        for s in [a, b] {
            if let SlotContent::BellHalf { pair, role } = self.contents[s] {
                self.pairs[pair].halves[role.index()] = Some(s);
            }
        }
        Ok(())
    }

    /// Erases the given slots. The surviving half of a broken pair stays
    /// entangled with nothing accessible, so its marginal is maximally mixed.
    pub fn erase(&mut self, slots: &[usize]) -> Result<(), QsymError> {
        for &s in slots {
            self.check(s)?;
        }
        for &s in slots {
            if let SlotContent::BellHalf { pair, role } = self.contents[s] {
                self.pairs[pair].halves[role.index()] = None;
            }
            self.contents[s] = SlotContent::Erased;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qubits(n: usize) -> Arc<SlotLayout> {
        Arc::new(SlotLayout::from_owners(2, 1, (0..n).map(|i| Owner::Channel { position: i, sub: 0 })).unwrap())
    }

    fn pair_layout(p: u32, m: u32) -> Arc<SlotLayout> {
        Arc::new(
            SlotLayout::from_owners(
                p,
                m,
                [Owner::AliceMemory { block: 0, sub: 0 }, Owner::BobMemory { block: 0, sub: 0 }],
            )
            .unwrap(),
        )
    }

    #[test]
    fn register_starts_at_zero() {
        let empty = SymbolicState::new(Arc::new(SlotLayout::default()));
        assert!(empty.layout().is_empty());
        let s = SymbolicState::new(qubits(3));
        for i in 0..3 {
            assert_eq!(s.computational_measure(i).unwrap(), MeasurementOutcome::Computational { x: 0 });
        }
        let mixed = SlotLayout::new(vec![
            Slot { label: "a".into(), p: 2, m: 1, owner: Owner::Channel { position: 0, sub: 0 } },
            Slot { label: "b".into(), p: 3, m: 1, owner: Owner::Channel { position: 1, sub: 0 } },
        ])
        .unwrap();
        let s = SymbolicState::new(Arc::new(mixed));
        assert_eq!(s.content(1), SlotContent::Classical(0));
    }

    #[test]
    fn duplicate_labels_rejected() {
        let slot = Slot { label: "x".into(), p: 2, m: 1, owner: Owner::Channel { position: 0, sub: 0 } };
        assert_eq!(SlotLayout::new(vec![slot.clone(), slot]).unwrap_err(), QsymError::DuplicateLabel("x".into()));
    }

    #[test]
    fn classical_encoding_of_codeword() {
        let mut s = SymbolicState::new(qubits(3));
        for (i, x) in [1, 0, 1].into_iter().enumerate() {
            s.set_classical(i, x).unwrap();
        }
        let read: Vec<_> = (0..3).map(|i| s.computational_measure(i).unwrap()).collect();
        assert_eq!(read, [1, 0, 1].map(|x| MeasurementOutcome::Computational { x }).to_vec());
        assert!(s.set_classical(0, 2).is_err());
    }

    #[test]
    fn entangled_slots_refuse_classical_ops() {
        let mut s = SymbolicState::new(pair_layout(2, 1));
        s.make_bell_pair(0, 1).unwrap();
        assert_eq!(s.set_classical(0, 1).unwrap_err(), QsymError::Entangled("A1,1".into()));
        assert!(matches!(s.computational_measure(1), Err(QsymError::Entangled(_))));
        assert!(matches!(s.make_bell_pair(0, 1), Err(QsymError::Entangled(_))));
    }

    #[test]
    fn pair_dimension_must_match() {
        let layout = SlotLayout::new(vec![
            Slot { label: "a".into(), p: 2, m: 1, owner: Owner::Channel { position: 0, sub: 0 } },
            Slot { label: "b".into(), p: 3, m: 1, owner: Owner::Channel { position: 1, sub: 0 } },
        ])
        .unwrap();
        let mut s = SymbolicState::new(Arc::new(layout));
        assert!(matches!(s.make_bell_pair(0, 1), Err(QsymError::DimensionMismatch(..))));
    }

    #[test]
    fn fresh_pair_measures_zero() {
        let mut s = SymbolicState::new(pair_layout(2, 3));
        s.make_bell_pair(0, 1).unwrap();
        assert_eq!(s.bell_measure(0, 1).unwrap(), MeasurementOutcome::Bell { x: 0, z: 0 });
        assert_eq!(s.content(0), SlotContent::Classical(0));
    }

    #[test]
    fn displacement_then_measure() {
        let mut s = SymbolicState::new(pair_layout(2, 1));
        s.make_bell_pair(0, 1).unwrap();
        s.apply_displacement(0, 1, 0).unwrap();
        assert_eq!(s.bell_measure(0, 1).unwrap(), MeasurementOutcome::Bell { x: 1, z: 0 });
    }

    #[test]
    fn xz_twice_on_qubits_cancels() {
        let mut s = SymbolicState::new(pair_layout(2, 1));
        s.make_bell_pair(0, 1).unwrap();
        let before = s.clone();
        s.apply_displacement(0, 0, 0).unwrap();
        assert_eq!(s, before);
        s.apply_displacement(0, 1, 1).unwrap();
        s.apply_displacement(0, 1, 1).unwrap();
        assert_eq!(s.bell_measure(0, 1).unwrap(), MeasurementOutcome::Bell { x: 0, z: 0 });
    }

    #[test]
    fn displacement_needs_a_pair() {
        let mut s = SymbolicState::new(qubits(1));
        assert_eq!(s.apply_displacement(0, 1, 0).unwrap_err(), QsymError::NotEntangled("Q1,1".into()));
    }

    #[test]
    fn measuring_across_pairs_fails() {
        let mut s = SymbolicState::new(qubits(4));
        s.make_bell_pair(0, 1).unwrap();
        s.make_bell_pair(2, 3).unwrap();
        assert!(matches!(s.bell_measure(0, 2), Err(QsymError::NotAPair(..))));
        assert!(matches!(s.bell_measure(0, 0), Err(QsymError::SameSlot)));
    }

    #[test]
    fn erasure_breaks_pairs() {
        let mut s = SymbolicState::new(qubits(3));
        s.make_bell_pair(0, 1).unwrap();
        s.erase(&[2]).unwrap();
        assert_eq!(s.content(2), SlotContent::Erased);
        s.erase(&[0]).unwrap();
        assert!(matches!(s.bell_measure(0, 1), Err(QsymError::Erased(_))));
        assert!(matches!(s.bell_measure(1, 0), Err(QsymError::Erased(_))));
        assert_eq!(s.partner(1), None);
        let before = s.clone();
        s.erase(&[]).unwrap();
        assert_eq!(s, before);
    }

    #[test]
    fn swap_moves_pair_halves() {
        let mut s = SymbolicState::new(qubits(3));
        s.make_bell_pair(0, 1).unwrap();
        s.apply_displacement(0, 1, 1).unwrap();
        s.swap(0, 2).unwrap();
        assert_eq!(s.partner(1), Some(2));
        assert_eq!(s.content(0), SlotContent::Classical(0));
        assert_eq!(s.bell_measure(2, 1).unwrap(), MeasurementOutcome::Bell { x: 1, z: 1 });
    }

    #[test]
    fn second_half_displacement_is_transposed() {
        // X on the second half equals X^{-1} on the first; over GF(3) that is x = 2
        let mut s = SymbolicState::new(pair_layout(3, 1));
        s.make_bell_pair(0, 1).unwrap();
        s.apply_displacement(1, 1, 1).unwrap();
        assert_eq!(s.bell_measure(0, 1).unwrap(), MeasurementOutcome::Bell { x: 2, z: 1 });
    }

    #[test]
    fn superdense_roundtrip_exhaustive() {
        for (p, m) in [(2, 1), (3, 1), (2, 2), (5, 1), (7, 1), (2, 3)] {
            let dim = u32::pow(p, m);
            for x in 0..dim {
                for z in 0..dim {
                    let mut s = SymbolicState::new(pair_layout(p, m));
                    s.make_bell_pair(0, 1).unwrap();
                    s.apply_displacement(0, x, z).unwrap();
                    assert_eq!(s.bell_measure(0, 1).unwrap(), MeasurementOutcome::Bell { x, z });
                }
            }
        }
    }

    #[test]
    fn displacements_compose_additively() {
        for (p, m) in [(2, 1), (3, 1), (2, 2), (5, 1)] {
            let dim = u32::pow(p, m);
            for x1 in 0..dim {
                for z1 in 0..dim {
                    for x2 in 0..dim {
                        for z2 in 0..dim {
                            let mut a = SymbolicState::new(pair_layout(p, m));
                            a.make_bell_pair(0, 1).unwrap();
                            let mut b = a.clone();
                            a.apply_displacement(0, x1, z1).unwrap();
                            a.apply_displacement(0, x2, z2).unwrap();
                            b.apply_displacement(0, digit_add(p, x1, x2), digit_add(p, z1, z2)).unwrap();
                            assert_eq!(a.bell_measure(0, 1).unwrap(), b.bell_measure(0, 1).unwrap());
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn erasure_commutes_with_disjoint_ops() {
        let base = {
            let mut s = SymbolicState::new(qubits(5));
            s.make_bell_pair(0, 1).unwrap();
            s
        };
        let mut a = base.clone();
        a.erase(&[3, 4]).unwrap();
        a.apply_displacement(0, 1, 0).unwrap();
        a.set_classical(2, 1).unwrap();
        let mut b = base;
        b.apply_displacement(0, 1, 0).unwrap();
        b.set_classical(2, 1).unwrap();
        b.erase(&[3, 4]).unwrap();
        assert_eq!(a, b);
    }
}
