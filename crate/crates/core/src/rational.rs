//! Exact rational helpers: literal parsing, `a/b` formatting, serde glue.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::str::FromStr;

/// Parses `7`, `-3`, `1/2`, `0.25` or `-1.5e0`-free decimals exactly.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let value = if let Some((num, den)) = body.split_once('/') {
        let num = parse_unsigned(num)?;
        let den = parse_unsigned(den)?;
        if den.is_zero() {
            return None;
        }
        BigRational::new(num, den)
    } else if let Some((int, frac)) = body.split_once('.') {
        if int.is_empty() && frac.is_empty() {
            return None;
        }
        let int = if int.is_empty() { BigInt::zero() } else { parse_unsigned(int)? };
        let scale = num_traits::pow(BigInt::from(10u32), frac.len());
        let frac = if frac.is_empty() { BigInt::zero() } else { parse_unsigned(frac)? };
        BigRational::new(int * &scale + frac, scale)
    } else {
        BigRational::from_integer(parse_unsigned(body)?)
    };
    Some(if neg { -value } else { value })
}

fn parse_unsigned(s: &str) -> Option<BigInt> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    BigInt::from_str(s).ok()
}

/// `a/b` in lowest terms, or just `a` for integers.
pub fn format_rational(q: &BigRational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Decimal rendering with `digits` fractional digits (truncated). Diagnostic only.
pub fn format_decimal(q: &BigRational, digits: usize) -> String {
    if q.is_integer() {
        return q.numer().to_string();
    }
    let scale = num_traits::pow(BigInt::from(10u32), digits);
    let scaled = (q.abs() * BigRational::from_integer(scale.clone())).trunc().to_integer();
    let int = &scaled / &scale;
    let frac = &scaled % &scale;
    let sign = if q.is_negative() { "-" } else { "" };
    let frac = format!("{:0>width$}", frac.to_string(), width = digits);
    let frac = frac.trim_end_matches('0');
    if frac.is_empty() {
        format!("{sign}{int}")
    } else {
        format!("{sign}{int}.{frac}")
    }
}

pub(crate) fn one() -> BigRational {
    BigRational::one()
}

pub(crate) fn zero() -> BigRational {
    BigRational::zero()
}

pub(crate) fn int(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

/// Serde adapter storing a rational as an `"a/b"` string.
pub mod serde_str {
    use super::*;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(q: &BigRational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(q))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigRational, D::Error> {
        let raw = String::deserialize(d)?;
        parse_rational(&raw).ok_or_else(|| D::Error::custom(format!("bad rational `{raw}`")))
    }
}

/// Serde adapter for `Vec<BigRational>` as a list of `"a/b"` strings.
pub mod serde_vec {
    use super::*;
    use serde::{de::Error, ser::SerializeSeq, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[BigRational], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for q in v {
            seq.serialize_element(&format_rational(q))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigRational>, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        raw.iter()
            .map(|r| parse_rational(r).ok_or_else(|| D::Error::custom(format!("bad rational `{r}`"))))
            .collect()
    }
}
