//! The two Singleton-type bounds on entanglement-assisted classical codes.
//!
//! For admissible `(n, d, c)`:
//!
//! * jointly encoded codes satisfy `k <= (1 + c/n)(n - d + 1)`;
//! * codes whose `i`-th encoder sees only the message and its own memory
//!   block satisfy `k <= max(n + c - 2d + 2, n - d + 1)`.
//!
//! All arithmetic is exact.

use serde::Serialize;
use thiserror::Error;

use crate::rational::Rational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BoundsError {
    #[error("inadmissible: {0}")]
    Inadmissible(&'static str),
}

/// Why `(n, d, c)` is not admissible, if it is not.
pub fn admissibility_violation(n: i64, d: i64, c: i64) -> Option<&'static str> {
    if n < 1 {
        Some("n < 1")
    } else if d < 1 {
        Some("d < 1")
    } else if c < 0 {
        Some("c < 0")
    } else if c > n {
        Some("c > n")
    } else if d > n + 1 {
        Some("d > n + 1")
    } else {
        None
    }
}

pub fn admissible(n: i64, d: i64, c: i64) -> bool {
    admissibility_violation(n, d, c).is_none()
}

pub fn check_admissible(n: i64, d: i64, c: i64) -> Result<(), BoundsError> {
    match admissibility_violation(n, d, c) {
        Some(why) => Err(BoundsError::Inadmissible(why)),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// `d - 1 < c`
    EntanglementRich,
    /// `c < d - 1`
    EntanglementPoor,
    /// `c = d - 1`, both branches agree.
    Boundary,
}

impl Regime {
    pub fn of(d: i64, c: i64) -> Regime {
        match (d - 1).cmp(&c) {
            std::cmp::Ordering::Less => Regime::EntanglementRich,
            std::cmp::Ordering::Greater => Regime::EntanglementPoor,
            std::cmp::Ordering::Equal => Regime::Boundary,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::EntanglementRich => "entanglement-rich",
            Regime::EntanglementPoor => "entanglement-poor",
            Regime::Boundary => "boundary",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BoundValue {
    #[serde(with = "crate::rational::as_string")]
    pub value: Rational,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regime: Option<Regime>,
}

pub fn eacc_singleton(n: i64, d: i64, c: i64) -> Result<BoundValue, BoundsError> {
    check_admissible(n, d, c)?;
    let value = (Rational::from_integer(1) + Rational::new(c, n)) * Rational::from_integer(n - d + 1);
    Ok(BoundValue { value, regime: None })
}

pub fn separate_singleton(n: i64, d: i64, c: i64) -> Result<BoundValue, BoundsError> {
    check_admissible(n, d, c)?;
    let rich = n + c - 2 * d + 2;
    let poor = n - d + 1;
    Ok(BoundValue { value: Rational::from_integer(rich.max(poor)), regime: Some(Regime::of(d, c)) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn admissibility() {
        assert!(admissible(3, 2, 2));
        assert!(!admissible(3, 2, 4));
        assert!(!admissible(3, 5, 0));
        assert!(admissible(3, 4, 0));
        assert_eq!(check_admissible(3, 2, 4), Err(BoundsError::Inadmissible("c > n")));
        assert_eq!(BoundsError::Inadmissible("c > n").to_string(), "inadmissible: c > n");
    }

    #[test]
    fn eacc_values() {
        assert_eq!(eacc_singleton(3, 2, 2).unwrap().value, Rational::new(10, 3));
        assert_eq!(eacc_singleton(4, 2, 2).unwrap().value, Rational::new(9, 2));
        for n in 1..8 {
            for d in 1..=n + 1 {
                assert_eq!(eacc_singleton(n, d, 0).unwrap().value, Rational::from_integer(n - d + 1));
            }
        }
        assert!(eacc_singleton(3, 2, 4).is_err());
    }

    #[test]
    fn separate_values() {
        let b = separate_singleton(3, 2, 2).unwrap();
        assert_eq!(b.value, Rational::from_integer(3));
        assert_eq!(b.regime, Some(Regime::EntanglementRich));
        assert_eq!(separate_singleton(4, 2, 2).unwrap().value, Rational::from_integer(4));
        let b = separate_singleton(5, 3, 2).unwrap();
        assert_eq!(b.regime, Some(Regime::Boundary));
        assert_eq!(b.value, Rational::from_integer(3));
        assert_eq!(separate_singleton(4, 4, 1).unwrap().regime, Some(Regime::EntanglementPoor));
    }

    #[test]
    fn boundary_branches_coincide() {
        for n in 1..30 {
            for c in 0..=n {
                let d = c + 1;
                if d <= n + 1 {
                    assert_eq!(n + c - 2 * d + 2, n - d + 1);
                }
            }
        }
    }

    #[test]
    fn monotone_in_c_and_d() {
        let n = 12;
        for d in 1..=n + 1 {
            for c in 0..n {
                assert!(eacc_singleton(n, d, c).unwrap().value <= eacc_singleton(n, d, c + 1).unwrap().value);
                assert!(separate_singleton(n, d, c).unwrap().value <= separate_singleton(n, d, c + 1).unwrap().value);
            }
        }
        for c in 0..=n {
            for d in 1..=n {
                assert!(eacc_singleton(n, d + 1, c).unwrap().value <= eacc_singleton(n, d, c).unwrap().value);
                assert!(separate_singleton(n, d + 1, c).unwrap().value <= separate_singleton(n, d, c).unwrap().value);
            }
        }
    }
}
