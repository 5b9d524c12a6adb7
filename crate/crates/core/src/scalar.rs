//! Arithmetic backends.
//!
//! Everything that can be computed exactly (measures with rational weights,
//! the walks built from them, flows, couplings, decomposition bookkeeping) is
//! generic over [`Scalar`], which is implemented for [`Rational`] and `f64`.
//! Spectral and variational quantities are always evaluated in `f64`.

use std::fmt::Debug;
use std::str::FromStr;

use num::bigint::BigInt;
use num::{BigRational, FromPrimitive, Num, One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

/// A field usable for weights and rates.
pub trait Scalar:
    Clone + Debug + PartialOrd + Num + Signed + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// True when equality and ordering are exact.
    const EXACT: bool;

    /// Slack allowed on "sums to one" style checks.
    const SUM_TOL: f64;

    fn from_ratio(num: i64, den: i64) -> Self;

    fn from_count(v: usize) -> Self {
        Self::from_ratio(v as i64, 1)
    }

    fn as_f64(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Residual capacities at or below this size are treated as saturated.
    fn is_negligible(&self) -> bool;

    /// Equality up to a relative tolerance (ignored for exact scalars).
    fn approx_eq(&self, other: &Self, rel: f64) -> bool;

    /// `self <= other` up to a relative tolerance (ignored for exact scalars).
    fn approx_le(&self, other: &Self, rel: f64) -> bool;

    fn to_json(&self) -> serde_json::Value;

    fn render(&self) -> String;

    /// Reads a JSON number or a decimal / `p/q` string.
    fn from_json(value: &serde_json::Value) -> Result<Self>;

    /// Strictly positive (unlike `Signed::is_positive`, false for `+0.0`).
    fn gt_zero(&self) -> bool {
        *self > Self::zero()
    }

    fn lt_zero(&self) -> bool {
        *self < Self::zero()
    }

    fn min_of(a: &Self, b: &Self) -> Self {
        if a <= b {
            a.clone()
        } else {
            b.clone()
        }
    }

    fn max_of(a: &Self, b: &Self) -> Self {
        if a >= b {
            a.clone()
        } else {
            b.clone()
        }
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;
    const SUM_TOL: f64 = 0.0;

    fn from_ratio(num: i64, den: i64) -> Self {
        Rational::new(BigInt::from(num), BigInt::from(den))
    }

    fn is_negligible(&self) -> bool {
        self.is_zero()
    }

    fn approx_eq(&self, other: &Self, _rel: f64) -> bool {
        self == other
    }

    fn approx_le(&self, other: &Self, _rel: f64) -> bool {
        self <= other
    }

    fn to_json(&self) -> serde_json::Value {
        serde_json::Value::String(self.render())
    }

    fn render(&self) -> String {
        if self.denom().is_one() {
            self.numer().to_string()
        } else {
            format!("{}/{}", self.numer(), self.denom())
        }
    }

    fn from_json(value: &serde_json::Value) -> Result<Self> {
        rational_from_json(value)
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;
    const SUM_TOL: f64 = 1e-12;

    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn is_negligible(&self) -> bool {
        self.abs() <= 1e-14
    }

    fn approx_eq(&self, other: &Self, rel: f64) -> bool {
        (self - other).abs() <= rel * 1f64.max(self.abs()).max(other.abs())
    }

    fn approx_le(&self, other: &Self, rel: f64) -> bool {
        *self <= *other + rel * 1f64.max(self.abs()).max(other.abs())
    }

    fn to_json(&self) -> serde_json::Value {
        serde_json::Number::from_f64(*self)
            .map(serde_json::Value::Number)
            .unwrap_or(serde_json::Value::Null)
    }

    fn render(&self) -> String {
        format!("{self}")
    }

    fn from_json(value: &serde_json::Value) -> Result<Self> {
        real_from_json(value)
    }
}

/// Parses `"p/q"`, integers and plain decimals (`"0.35"`, `"-1.5e-2"`) exactly.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let s = text.trim();
    let bad = || Error::Parse(format!("not a rational number: {text:?}"));
    if let Some((p, q)) = s.split_once('/') {
        let p = BigInt::from_str(p.trim()).map_err(|_| bad())?;
        let q = BigInt::from_str(q.trim()).map_err(|_| bad())?;
        if q.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(p, q));
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => (&s[..pos], s[pos + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let all_digits = format!("{int_part}{frac_part}");
    let numer = BigInt::from_str_radix(&all_digits, 10).map_err(|_| bad())?;
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10u32);
    let mut value = if scale >= 0 {
        Rational::from_integer(numer * num::pow(ten, scale as usize))
    } else {
        Rational::new(numer, num::pow(ten, (-scale) as usize))
    };
    if negative {
        value = -value;
    }
    Ok(value)
}

/// Parses a JSON number or string into an exact rational, reading decimals
/// digit-for-digit rather than through binary floating point.
pub fn rational_from_json(value: &serde_json::Value) -> Result<Rational> {
    match value {
        serde_json::Value::String(s) => parse_rational(s),
        serde_json::Value::Number(n) => parse_rational(&n.to_string()),
        other => Err(Error::Parse(format!("expected a number, got {other}"))),
    }
}

pub fn real_from_json(value: &serde_json::Value) -> Result<f64> {
    match value {
        serde_json::Value::Number(n) => n
            .as_f64()
            .ok_or_else(|| Error::Parse(format!("not a finite number: {n}"))),
        serde_json::Value::String(s) => {
            if s.contains('/') {
                Ok(parse_rational(s)?.as_f64())
            } else {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("not a number: {s:?}")))
            }
        }
        other => Err(Error::Parse(format!("expected a number, got {other}"))),
    }
}

pub fn sum<S: Scalar>(values: impl IntoIterator<Item = S>) -> S {
    values.into_iter().fold(S::zero(), |acc, v| acc + v)
}

pub mod serde_scalar {
    //! `serialize_with` helpers: rationals render as `"p/q"`, reals as numbers.
    use serde::ser::{SerializeSeq, Serializer};

    use super::Scalar;

    pub fn one<S: Scalar, Z: Serializer>(v: &S, ser: Z) -> Result<Z::Ok, Z::Error> {
        serde::Serialize::serialize(&v.to_json(), ser)
    }

    pub fn many<S: Scalar, Z: Serializer>(vs: &[S], ser: Z) -> Result<Z::Ok, Z::Error> {
        let mut seq = ser.serialize_seq(Some(vs.len()))?;
        for v in vs {
            seq.serialize_element(&v.to_json())?;
        }
        seq.end()
    }

    /// `None` stands for a vacuous (+infinity) statistic.
    pub fn opt<S: Scalar, Z: Serializer>(v: &Option<S>, ser: Z) -> Result<Z::Ok, Z::Error> {
        match v {
            Some(v) => serde::Serialize::serialize(&v.to_json(), ser),
            None => ser.serialize_str("vacuous"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_parsing_is_exact() {
        assert_eq!(parse_rational("0.3").unwrap(), Rational::from_ratio(3, 10));
        assert_eq!(parse_rational("1/3").unwrap(), Rational::from_ratio(1, 3));
        assert_eq!(parse_rational("-2.5e-1").unwrap(), Rational::from_ratio(-1, 4));
        assert_eq!(parse_rational("7").unwrap(), Rational::from_ratio(7, 1));
        assert_eq!(parse_rational(".5").unwrap(), Rational::from_ratio(1, 2));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational(".").is_err());
    }

    #[test]
    fn json_numbers_keep_their_decimal_digits() {
        let v: serde_json::Value = serde_json::from_str("0.1").unwrap();
        assert_eq!(rational_from_json(&v).unwrap(), Rational::from_ratio(1, 10));
    }

    #[test]
    fn rendering() {
        assert_eq!(Rational::from_ratio(6, 4).render(), "3/2");
        assert_eq!(Rational::from_ratio(4, 2).render(), "2");
    }
}
