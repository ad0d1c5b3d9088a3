//! Exact rationals and their `"p/q"` string form.

use num_rational::Ratio;

pub type Rational = Ratio<i64>;

pub fn parse(s: &str) -> Option<Rational> {
    let (n, d): (i64, i64) = match s.split_once('/') {
        Some((n, d)) => (n.trim().parse().ok()?, d.trim().parse().ok()?),
        None => (s.trim().parse().ok()?, 1),
    };
    (d != 0).then(|| Rational::new(n, d))
}

pub fn to_f64(r: &Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Serde adapter rendering a [`Rational`] as `"p/q"` (or `"p"` for integers).
pub mod as_string {
    use super::Rational;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(r)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        super::parse(&s).ok_or_else(|| D::Error::custom(format!("not a rational: {s:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        assert_eq!(parse("10/3"), Some(Rational::new(10, 3)));
        assert_eq!(parse("4"), Some(Rational::from_integer(4)));
        assert_eq!(parse("6/4"), Some(Rational::new(3, 2)));
        assert_eq!(parse("1/0"), None);
        assert_eq!(parse("x"), None);
        assert_eq!(Rational::new(10, 3).to_string(), "10/3");
        assert_eq!(Rational::new(6, 3).to_string(), "2");
    }
}
