//! Exact arithmetic over prime-power fields GF(p^m).
//!
//! Elements are stored as integers in `[0, p^m)`: the base-`p` digits of the
//! integer are the coefficients of the polynomial residue, constant term
//! first. Addition is digit-wise mod `p`; multiplication goes through
//! log/antilog tables built from a primitive element.
//!
//! Every `(p, m)` with `p^m <= 2^16` maps to exactly one canonical modulus:
//! the monic degree-`m` polynomial whose lower coefficients, read as a base-`p`
//! integer, are smallest among all primitive polynomials. The rule is fixed
//! (see [`POLY_TABLE_VERSION`]) so codes and reports are reproducible bit for
//! bit.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest supported field order.
pub const MAX_ORDER: u32 = 1 << 16;

/// Identifies the rule used to pick the canonical modulus for each `(p, m)`.
pub const POLY_TABLE_VERSION: &str = "lex-min-primitive/1";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GfError {
    #[error("characteristic {0} is not prime")]
    NotPrime(u32),
    #[error("extension degree must be at least 1")]
    ZeroDegree,
    #[error("{p}^{m} overflows the representable range")]
    Overflow { p: u32, m: u32 },
    #[error("GF({p}^{m}) is outside the built-in table (order > {max})", max = MAX_ORDER)]
    OutsideTable { p: u32, m: u32 },
    #[error("elements belong to different fields")]
    FieldMismatch,
    #[error("division by zero")]
    DivisionByZero,
    #[error("value {value} is not an element of GF({order})")]
    OutOfRange { value: u32, order: u32 },
    #[error("primitive polynomial {found:?} does not match the table entry {expected:?}")]
    PolynomialMismatch { expected: Vec<u32>, found: Vec<u32> },
}

/// Parameters of a finite field GF(p^m).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FieldSpec {
    pub p: u32,
    pub m: u32,
    /// Coefficients of the monic modulus, constant term first (length `m + 1`).
    pub primitive_poly: Vec<u32>,
    pub order: u32,
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.m == 1 {
            write!(f, "GF({})", self.p)
        } else {
            write!(f, "GF({}^{})", self.p, self.m)
        }
    }
}

struct FieldInner {
    spec: FieldSpec,
    // exp has length 2 (order - 1) so log sums never need a reduction
    exp: Vec<u32>,
    log: Vec<u32>,
}

/// A shared handle to a finite field with its arithmetic tables.
///
/// Cloning is cheap. Two handles compare equal iff their specs do.
#[derive(Clone)]
pub struct Field {
    inner: Arc<FieldInner>,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Field({})", self.inner.spec)
    }
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner) || self.inner.spec == other.inner.spec
    }
}

impl Eq for Field {}

pub fn is_prime(p: u32) -> bool {
    if p < 2 {
        return false;
    }
    let mut i = 2u32;
    while (i as u64) * (i as u64) <= p as u64 {
        if p.is_multiple_of(i) {
            return false;
        }
        i += 1;
    }
    true
}

/// Splits `n` into `(p, m)` with `n = p^m`, if `n` is a prime power.
pub fn prime_power(n: u32) -> Option<(u32, u32)> {
    if n < 2 {
        return None;
    }
    let mut p = 2;
    while p * p <= n && !n.is_multiple_of(p) {
        p += 1;
    }
    if !n.is_multiple_of(p) {
        p = n;
    }
    let (mut rest, mut m) = (n, 0);
    while rest % p == 0 {
        rest /= p;
        m += 1;
    }
    (rest == 1).then_some((p, m))
}

fn field_cache() -> &'static Mutex<HashMap<(u32, u32), Field>> {
    static CACHE: OnceLock<Mutex<HashMap<(u32, u32), Field>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

impl Field {
    /// Returns GF(p^m) with its canonical modulus.
    pub fn new(p: u32, m: u32) -> Result<Field, GfError> {
        if !is_prime(p) {
            return Err(GfError::NotPrime(p));
        }
        if m == 0 {
            return Err(GfError::ZeroDegree);
        }
        let order = p.checked_pow(m).ok_or(GfError::Overflow { p, m })?;
        if order > MAX_ORDER {
            return Err(GfError::OutsideTable { p, m });
        }
        if let Some(f) = field_cache().lock().unwrap().get(&(p, m)) {
            return Ok(f.clone());
        }
        let field = Field { inner: Arc::new(build_field(p, m, order)) };
        field_cache().lock().unwrap().insert((p, m), field.clone());
        Ok(field)
    }

    /// Returns the field of the given prime-power order.
    pub fn with_order(order: u32) -> Result<Field, GfError> {
        match prime_power(order) {
            Some((p, m)) => Field::new(p, m),
            None => Err(GfError::NotPrime(order)),
        }
    }

    /// Rebuilds a field from a serialized spec, checking it against the table.
    pub fn from_spec(spec: &FieldSpec) -> Result<Field, GfError> {
        let field = Field::new(spec.p, spec.m)?;
        if field.spec().primitive_poly != spec.primitive_poly {
            return Err(GfError::PolynomialMismatch {
                expected: field.spec().primitive_poly.clone(),
                found: spec.primitive_poly.clone(),
            });
        }
        Ok(field)
    }

    pub fn spec(&self) -> &FieldSpec {
        &self.inner.spec
    }

    #[inline]
    pub fn order(&self) -> u32 {
        self.inner.spec.order
    }

    #[inline]
    pub fn characteristic(&self) -> u32 {
        self.inner.spec.p
    }

    #[inline]
    pub fn degree(&self) -> u32 {
        self.inner.spec.m
    }

    pub fn elem(&self, rep: u32) -> Result<FieldElem, GfError> {
        if rep >= self.order() {
            return Err(GfError::OutOfRange { value: rep, order: self.order() });
        }
        Ok(FieldElem { field: self.clone(), rep })
    }

    #[inline]
    pub fn add(&self, a: u32, b: u32) -> u32 {
        digit_add(self.characteristic(), a, b)
    }

    #[inline]
    pub fn neg(&self, a: u32) -> u32 {
        digit_neg(self.characteristic(), a)
    }

    #[inline]
    pub fn sub(&self, a: u32, b: u32) -> u32 {
        self.add(a, self.neg(b))
    }

    #[inline]
    pub fn mul(&self, a: u32, b: u32) -> u32 {
        if a == 0 || b == 0 {
            return 0;
        }
        let inner = &*self.inner;
        inner.exp[(inner.log[a as usize] + inner.log[b as usize]) as usize]
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn inv(&self, a: u32) -> Option<u32> {
        if a == 0 {
            return None;
        }
        let inner = &*self.inner;
        let n = self.order() - 1;
        Some(inner.exp[((n - inner.log[a as usize]) % n) as usize])
    }

    pub fn div(&self, a: u32, b: u32) -> Result<u32, GfError> {
        let inv = self.inv(b).ok_or(GfError::DivisionByZero)?;
        Ok(self.mul(a, inv))
    }

    pub fn pow(&self, a: u32, e: u64) -> u32 {
        if e == 0 {
            return 1;
        }
        if a == 0 {
            return 0;
        }
        let n = (self.order() - 1) as u64;
        let l = self.inner.log[a as usize] as u64;
        self.inner.exp[((l * (e % n)) % n) as usize]
    }

    /// Iterates all elements in canonical (integer) order.
    pub fn elements(&self) -> impl Iterator<Item = u32> {
        0..self.order()
    }
}

/// Digit-wise addition of base-`p` integers, i.e. vector addition in GF(p)^m.
#[inline]
pub fn digit_add(p: u32, a: u32, b: u32) -> u32 {
    if p == 2 {
        return a ^ b;
    }
    let (mut a, mut b) = (a, b);
    let (mut out, mut scale) = (0, 1);
    while a > 0 || b > 0 {
        out += ((a % p + b % p) % p) * scale;
        a /= p;
        b /= p;
        scale *= p;
    }
    out
}

#[inline]
pub fn digit_neg(p: u32, a: u32) -> u32 {
    if p == 2 {
        return a;
    }
    let mut a = a;
    let (mut out, mut scale) = (0, 1);
    while a > 0 {
        out += ((p - a % p) % p) * scale;
        a /= p;
        scale *= p;
    }
    out
}

/// Digit-wise inner product of two base-`p` integers, mod `p`.
pub fn digit_dot(p: u32, a: u32, b: u32) -> u32 {
    let (mut a, mut b) = (a, b);
    let mut acc = 0;
    while a > 0 && b > 0 {
        acc = (acc + (a % p) * (b % p)) % p;
        a /= p;
        b /= p;
    }
    acc
}

fn build_field(p: u32, m: u32, order: u32) -> FieldInner {
    if m == 1 {
        let g = (1..p.max(2))
            .find(|&g| cyclic_powers(order, |x| ((x as u64 * g as u64) % p as u64) as u32).is_some())
            .unwrap_or(1);
        let exp = cyclic_powers(order, |x| ((x as u64 * g as u64) % p as u64) as u32)
            .expect("prime fields have a primitive root");
        return finish(FieldSpec { p, m, primitive_poly: vec![0, 1], order }, exp);
    }
    // lower coefficients as a base-p integer; constant term must be nonzero
    for low in 1..order {
        if low % p == 0 {
            continue;
        }
        let coeffs = digits(p, m, low);
        let times_x = |x: u32| mul_by_x(p, m, &coeffs, x);
        if let Some(exp) = cyclic_powers(order, times_x) {
            let mut poly = coeffs.clone();
            poly.push(1);
            return finish(FieldSpec { p, m, primitive_poly: poly, order }, exp);
        }
    }
    unreachable!("every finite field has a primitive polynomial")
}

fn digits(p: u32, m: u32, mut v: u32) -> Vec<u32> {
    (0..m)
        .map(|_| {
            let d = v % p;
            v /= p;
            d
        })
        .collect()
}

// Multiplies the residue `x_rep` by x modulo the monic polynomial x^m + low(x).
fn mul_by_x(p: u32, m: u32, low: &[u32], x_rep: u32) -> u32 {
    let top = p.pow(m - 1);
    let lead = x_rep / top;
    let shifted = (x_rep % top) * p;
    if lead == 0 {
        return shifted;
    }
    // x^m = -low(x), scaled by the carried leading coefficient
    let mut sub = 0;
    let mut scale = 1;
    for &c in low {
        sub += ((c * lead) % p) * scale;
        scale *= p;
    }
    digit_add(p, shifted, digit_neg(p, sub))
}

// Powers 1, g, g^2, ... if `step` generates the full multiplicative group.
fn cyclic_powers(order: u32, step: impl Fn(u32) -> u32) -> Option<Vec<u32>> {
    let n = order - 1;
    let mut exp = Vec::with_capacity(n as usize);
    let mut x = 1u32;
    for i in 0..n {
        if i > 0 && x == 1 {
            return None;
        }
        exp.push(x);
        x = step(x);
    }
    (x == 1).then_some(exp)
}

fn finish(spec: FieldSpec, mut exp: Vec<u32>) -> FieldInner {
    let n = exp.len();
    let mut log = vec![0u32; spec.order as usize];
    for (i, &e) in exp.iter().enumerate() {
        log[e as usize] = i as u32;
    }
    exp.extend_from_within(0..n);
    FieldInner { spec, exp, log }
}

/// Arithmetic operation selector for [`FieldElem::arith`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// A field element tagged with its field.
#[derive(Clone, PartialEq, Eq)]
pub struct FieldElem {
    field: Field,
    rep: u32,
}

impl fmt::Debug for FieldElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.rep, self.field.spec())
    }
}

impl FieldElem {
    pub fn rep(&self) -> u32 {
        self.rep
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn arith(&self, other: &FieldElem, op: FieldOp) -> Result<FieldElem, GfError> {
        if self.field != other.field {
            return Err(GfError::FieldMismatch);
        }
        let f = &self.field;
        let rep = match op {
            FieldOp::Add => f.add(self.rep, other.rep),
            FieldOp::Sub => f.sub(self.rep, other.rep),
            FieldOp::Mul => f.mul(self.rep, other.rep),
            FieldOp::Div => f.div(self.rep, other.rep)?,
        };
        Ok(FieldElem { field: f.clone(), rep })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Schoolbook polynomial product reduced by the modulus, independent of the tables.
    fn slow_mul(spec: &FieldSpec, a: u32, b: u32) -> u32 {
        let (p, m) = (spec.p, spec.m as usize);
        let da = digits(p, spec.m, a);
        let db = digits(p, spec.m, b);
        let mut prod = vec![0u32; 2 * m];
        for i in 0..m {
            for j in 0..m {
                prod[i + j] = (prod[i + j] + da[i] * db[j]) % p;
            }
        }
        for deg in (m..2 * m).rev() {
            let c = prod[deg];
            if c == 0 {
                continue;
            }
            for (l, &coef) in spec.primitive_poly.iter().enumerate() {
                let idx = deg - m + l;
                prod[idx] = (prod[idx] + p * p - (c * coef) % p) % p;
            }
        }
        prod[..m].iter().rev().fold(0, |acc, &d| acc * p + d)
    }

    #[test]
    fn prime_fields() {
        let f = Field::new(2, 1).unwrap();
        assert_eq!(f.spec().primitive_poly, vec![0, 1]);
        assert_eq!(f.order(), 2);
        assert_eq!(f.mul(1, 1), 1);
        let f7 = Field::new(7, 1).unwrap();
        assert_eq!(f7.order(), 7);
        assert_eq!(f7.mul(3, 5), 1);
        assert_eq!(f7.add(4, 5), 2);
    }

    #[test]
    fn gf4_x_times_x() {
        let f = Field::new(2, 2).unwrap();
        assert_eq!(f.spec().primitive_poly, vec![1, 1, 1]);
        assert_eq!(f.mul(2, 2), 3);
    }

    #[test]
    fn gf8_table_entry_is_stable() {
        let a = Field::new(2, 3).unwrap();
        let b = Field::new(2, 3).unwrap();
        assert_eq!(a.spec(), b.spec());
        assert_eq!(a.spec().primitive_poly, vec![1, 1, 0, 1]);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert_eq!(Field::new(4, 1).unwrap_err(), GfError::NotPrime(4));
        assert_eq!(Field::new(2, 0).unwrap_err(), GfError::ZeroDegree);
        assert_eq!(Field::new(2, 17).unwrap_err(), GfError::OutsideTable { p: 2, m: 17 });
        assert_eq!(Field::new(3, 40).unwrap_err(), GfError::Overflow { p: 3, m: 40 });
    }

    #[test]
    fn elem_arith_checks_fields() {
        let f2 = Field::new(2, 1).unwrap();
        let f3 = Field::new(3, 1).unwrap();
        let a = f2.elem(1).unwrap();
        let b = f3.elem(1).unwrap();
        assert_eq!(a.arith(&b, FieldOp::Add).unwrap_err(), GfError::FieldMismatch);
        let zero = f2.elem(0).unwrap();
        assert_eq!(a.arith(&zero, FieldOp::Div).unwrap_err(), GfError::DivisionByZero);
        assert_eq!(a.arith(&a, FieldOp::Div).unwrap().rep(), 1);
        assert!(f2.elem(2).is_err());
    }

    #[test]
    fn field_axioms_exhaustive_small_fields() {
        for q in 2..=64u32 {
            let Some((p, m)) = prime_power(q) else { continue };
            let f = Field::new(p, m).unwrap();
            for a in 0..q {
                if a != 0 {
                    let inv = f.inv(a).unwrap();
                    assert_eq!(f.mul(a, inv), 1, "inverse in GF({q})");
                    assert_eq!(f.pow(a, (q - 1) as u64), 1, "group order in GF({q})");
                    assert_eq!(f.div(a, a).unwrap(), 1);
                }
                assert_eq!(f.add(a, f.neg(a)), 0);
                for b in 0..q {
                    assert_eq!(f.mul(a, b), slow_mul(f.spec(), a, b), "GF({q}) {a}*{b}");
                    assert_eq!(f.add(a, b), f.add(b, a));
                    assert_eq!(f.mul(a, b), f.mul(b, a));
                    assert_eq!(f.sub(f.add(a, b), b), a);
                    // associativity and distributivity over a stride of c keeps this quick
                    for c in (0..q).step_by(((q / 8).max(1)) as usize) {
                        assert_eq!(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
                        assert_eq!(f.add(f.add(a, b), c), f.add(a, f.add(b, c)));
                        assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
                    }
                }
            }
        }
    }

    #[test]
    fn large_tables_build() {
        let f = Field::new(2, 16).unwrap();
        assert_eq!(f.order(), 65536);
        assert_eq!(f.mul(f.inv(12345).unwrap(), 12345), 1);
        let f = Field::new(251, 2).unwrap();
        assert_eq!(f.mul(f.inv(777).unwrap(), 777), 1);
    }

    #[test]
    fn prime_power_split() {
        assert_eq!(prime_power(8), Some((2, 3)));
        assert_eq!(prime_power(9), Some((3, 2)));
        assert_eq!(prime_power(7), Some((7, 1)));
        assert_eq!(prime_power(6), None);
        assert_eq!(prime_power(1), None);
    }

    #[test]
    fn from_spec_detects_foreign_polynomial() {
        let mut spec = Field::new(2, 3).unwrap().spec().clone();
        spec.primitive_poly = vec![1, 0, 1, 1];
        assert!(matches!(Field::from_spec(&spec), Err(GfError::PolynomialMismatch { .. })));
    }
}
