//! Exact rational numbers and their text form.
//!
//! Capacities and demands are kept as `Ratio<i64>` so that reserve/release
//! cycles restore state bit for bit. At config and file boundaries a rational
//! is written as `num/den` (or a bare integer) and may be read from a plain
//! decimal such as `0.125`, which is converted exactly.

use std::fmt::Write as _;

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = Ratio<i64>;

pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(num, den)
}

pub fn int(v: i64) -> Rational {
    Rational::from_integer(v)
}

/// Parses `a/b`, `a` or a finite decimal like `-0.375` into an exact rational.
pub fn parse(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational number: {s:?}"));
    if let Some((num, den)) = s.split_once('/') {
        let num: i64 = num.trim().parse().map_err(|_| bad())?;
        let den: i64 = den.trim().parse().map_err(|_| bad())?;
        if den == 0 {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(Rational::new(num, den));
    }
    if let Some((whole, fraction)) = s.split_once('.') {
        if fraction.is_empty() || !fraction.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        if fraction.len() > 15 {
            return Err(Error::Parse(format!("too many decimal places in {s:?}")));
        }
        let negative = whole.starts_with('-');
        let whole_abs = whole.trim_start_matches(['-', '+']);
        let whole_abs: i64 = if whole_abs.is_empty() {
            0
        } else {
            whole_abs.parse().map_err(|_| bad())?
        };
        let den = 10i64.pow(fraction.len() as u32);
        let frac_num: i64 = fraction.parse().map_err(|_| bad())?;
        let num = whole_abs
            .checked_mul(den)
            .and_then(|v| v.checked_add(frac_num))
            .ok_or_else(bad)?;
        let r = Rational::new(num, den);
        return Ok(if negative { -r } else { r });
    }
    s.parse::<i64>().map(Rational::from_integer).map_err(|_| bad())
}

/// `num/den`, or just `num` for integers.
pub fn format(r: &Rational) -> String {
    let mut out = String::new();
    if r.is_integer() {
        let _ = write!(out, "{}", r.numer());
    } else {
        let _ = write!(out, "{}/{}", r.numer(), r.denom());
    }
    out
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Closest rational with a bounded denominator, for turning measured floats
/// into calibration inputs.
pub fn from_f64(v: f64) -> Result<Rational> {
    if v.is_nan() || v.is_infinite() {
        return Err(Error::Parse(format!("cannot represent {v} as a rational")));
    }
    if v.is_zero() {
        return Ok(Rational::zero());
    }
    Rational::approximate_float(v)
        .ok_or_else(|| Error::Parse(format!("cannot represent {v} as a rational")))
}

/// `v` rounded to the nearest multiple of `1/den`.
pub fn quantize(v: f64, den: i64) -> Result<Rational> {
    let scaled = (v * den as f64).round();
    if !scaled.is_finite() || scaled.abs() > i64::MAX as f64 / 2.0 {
        return Err(Error::Parse(format!("cannot represent {v} with denominator {den}")));
    }
    Ok(Rational::new(scaled as i64, den))
}

/// `floor(a / b)` clamped at zero, for counting how many demands of size `b` fit
/// into `a`.
pub fn fits(a: &Rational, b: &Rational) -> u64 {
    if b.is_zero() {
        return u64::MAX;
    }
    let q = (a / b).floor().to_integer();
    q.max(0) as u64
}

/// serde adapter storing a rational as a `num/den` string. Integers and
/// decimal numbers are accepted on input.
pub mod serde_str {
    use serde::de::{self, Deserializer, Visitor};
    use serde::Serializer;

    use super::Rational;

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::format(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        d.deserialize_any(RationalVisitor)
    }

    pub(super) struct RationalVisitor;

    impl<'de> Visitor<'de> for RationalVisitor {
        type Value = Rational;

        fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
            f.write_str("a rational as \"num/den\", an integer or a decimal")
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<Rational, E> {
            super::parse(v).map_err(E::custom)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<Rational, E> {
            Ok(Rational::from_integer(v))
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<Rational, E> {
            i64::try_from(v)
                .map(Rational::from_integer)
                .map_err(|_| E::custom("integer out of range"))
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<Rational, E> {
            // Go through the shortest decimal form so 0.1 becomes 1/10.
            super::parse(&format!("{v:?}")).map_err(E::custom)
        }
    }
}

pub mod serde_str_vec {
    use serde::de::{Deserializer, SeqAccess, Visitor};
    use serde::ser::SerializeSeq;
    use serde::Serializer;

    use super::Rational;

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for r in v {
            seq.serialize_element(&super::format(r))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        struct SeqVisitor;
        impl<'de> Visitor<'de> for SeqVisitor {
            type Value = Vec<Rational>;

            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a list of rationals")
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Self::Value, A::Error> {
                let mut out = Vec::new();
                while let Some(Wrapped(r)) = seq.next_element()? {
                    out.push(r);
                }
                Ok(out)
            }
        }
        d.deserialize_seq(SeqVisitor)
    }

    struct Wrapped(Rational);

    impl<'de> serde::Deserialize<'de> for Wrapped {
        fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
            d.deserialize_any(super::serde_str::RationalVisitor).map(Wrapped)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_forms() {
        assert_eq!(parse("1/8").unwrap(), ratio(1, 8));
        assert_eq!(parse(" 2/6 ").unwrap(), ratio(1, 3));
        assert_eq!(parse("4").unwrap(), int(4));
        assert_eq!(parse("0.125").unwrap(), ratio(1, 8));
        assert_eq!(parse("-1.5").unwrap(), ratio(-3, 2));
        assert_eq!(parse(".5").unwrap(), ratio(1, 2));
    }

    #[test]
    fn rejects_garbage() {
        for s in ["", "1/0", "a/b", "1.", "1.2.3", "0x10", "1/2/3"] {
            assert!(parse(s).is_err(), "{s:?} should not parse");
        }
    }

    #[test]
    fn formats_reduced() {
        assert_eq!(format(&ratio(2, 6)), "1/3");
        assert_eq!(format(&int(40)), "40");
        assert_eq!(format(&ratio(95, 3)), "95/3");
    }

    #[test]
    fn fits_counts_whole_multiples() {
        assert_eq!(fits(&int(1), &ratio(1, 6)), 6);
        assert_eq!(fits(&int(1), &ratio(2, 6)), 3);
        assert_eq!(fits(&ratio(1, 2), &ratio(1, 3)), 1);
        assert_eq!(fits(&ratio(-1, 2), &ratio(1, 3)), 0);
    }

    #[test]
    fn float_conversion_is_exact_for_dyadics() {
        assert_eq!(from_f64(0.375).unwrap(), ratio(3, 8));
        assert_eq!(from_f64(0.0).unwrap(), int(0));
        assert!(from_f64(f64::NAN).is_err());
        assert_eq!(quantize(0.1234567, 1000).unwrap(), ratio(123, 1000));
        assert!(quantize(f64::INFINITY, 10).is_err());
    }
}
