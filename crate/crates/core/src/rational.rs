//! Exact rational values and their `"num/den"` wire form.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{LabError, Result};

/// Arbitrary precision rational, always kept in lowest terms.
pub type Rational = num_rational::BigRational;

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// `2^-k`.
pub fn half_pow(k: usize) -> Rational {
    Rational::new_raw(BigInt::one(), BigInt::one() << k)
}

/// `2^k` for any signed `k`.
pub fn two_pow(k: i64) -> Rational {
    if k >= 0 {
        Rational::from_integer(BigInt::one() << k as usize)
    } else {
        half_pow(k.unsigned_abs() as usize)
    }
}

/// Parses `"num/den"` or a bare integer. The denominator must be positive.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || LabError::Parse(format!("invalid rational {s:?}; expected \"num/den\""));
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().map_err(|_| bad())?;
            let d: BigInt = d.trim().parse().map_err(|_| bad())?;
            if !d.is_positive() {
                return Err(LabError::Parse(format!(
                    "rational {s:?} needs a positive denominator"
                )));
            }
            Ok(Rational::new(n, d))
        }
        None => Ok(Rational::from_integer(s.parse().map_err(|_| bad())?)),
    }
}

/// Canonical wire form: always `"num/den"` in lowest terms, so `1` is `"1/1"`.
pub fn format_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Serde adapter for [`Rational`] fields using the `"num/den"` string form.
pub mod serde_rational {
    use super::*;

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter for `Vec<Rational>`.
pub mod serde_rational_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(format_rational))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Vec<Rational>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|s| parse_rational(s).map_err(serde::de::Error::custom))
            .collect()
    }
}

/// A rational or `+∞`, produced by the ratio convention `a/0 := ∞` (`a ≠ 0`),
/// `0/0 := 0`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ExtendedRational {
    Finite(Rational),
    Infinite,
}

impl ExtendedRational {
    pub fn zero() -> Self {
        Self::Finite(Rational::zero())
    }

    pub fn one() -> Self {
        Self::Finite(Rational::one())
    }

    /// `num / den` under the zero-denominator convention.
    pub fn ratio(num: &Rational, den: &Rational) -> Self {
        if den.is_zero() {
            if num.is_zero() {
                Self::zero()
            } else {
                Self::Infinite
            }
        } else {
            Self::Finite(num / den)
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Self::Infinite)
    }

    pub fn finite(&self) -> Option<&Rational> {
        match self {
            Self::Finite(r) => Some(r),
            Self::Infinite => None,
        }
    }

    pub fn is_negative(&self) -> bool {
        matches!(self, Self::Finite(r) if r.is_negative())
    }

    pub fn abs(&self) -> Self {
        match self {
            Self::Finite(r) => Self::Finite(r.abs()),
            Self::Infinite => Self::Infinite,
        }
    }

    /// Measure-theoretic product with a finite weight: `0 · ∞ = 0`.
    pub fn weighted(&self, w: &Rational) -> Self {
        match self {
            Self::Finite(r) => Self::Finite(r * w),
            Self::Infinite if w.is_zero() => Self::zero(),
            Self::Infinite => Self::Infinite,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        match (self, other) {
            (Self::Finite(a), Self::Finite(b)) => Self::Finite(a + b),
            _ => Self::Infinite,
        }
    }

    pub fn div_finite(&self, d: &Rational) -> Self {
        match self {
            Self::Finite(r) => Self::ratio(r, d),
            Self::Infinite => Self::Infinite,
        }
    }
}

impl From<Rational> for ExtendedRational {
    fn from(r: Rational) -> Self {
        Self::Finite(r)
    }
}

impl Ord for ExtendedRational {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Self::Finite(a), Self::Finite(b)) => a.cmp(b),
            (Self::Finite(_), Self::Infinite) => Ordering::Less,
            (Self::Infinite, Self::Finite(_)) => Ordering::Greater,
            (Self::Infinite, Self::Infinite) => Ordering::Equal,
        }
    }
}

impl PartialOrd for ExtendedRational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for ExtendedRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Finite(r) => f.write_str(&format_rational(r)),
            Self::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for ExtendedRational {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "∞" => Ok(Self::Infinite),
            other => parse_rational(other).map(Self::Finite),
        }
    }
}

impl Serialize for ExtendedRational {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ExtendedRational {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// `⌊log2 r⌋` for positive `r`.
pub fn floor_log2(r: &Rational) -> i64 {
    assert!(r.is_positive());
    let (n, d) = (r.numer(), r.denom());
    // Start from the bit-length estimate and correct by at most one step.
    let mut k = n.bits() as i64 - d.bits() as i64;
    while two_pow(k) > *r {
        k -= 1;
    }
    while two_pow(k + 1) <= *r {
        k += 1;
    }
    k
}

/// `Some(k)` when `r = 2^k` exactly.
pub fn exact_log2(r: &Rational) -> Option<i64> {
    if !r.is_positive() {
        return None;
    }
    let k = floor_log2(r);
    (two_pow(k) == *r).then_some(k)
}

/// Smallest integer `≥ r`.
pub fn ceil_int(r: &Rational) -> BigInt {
    let (q, rem) = r.numer().div_mod_floor(r.denom());
    if rem.is_zero() {
        q
    } else {
        q + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_form() {
        assert_eq!(format_rational(&ratio(2, 4)), "1/2");
        assert_eq!(format_rational(&int(1)), "1/1");
        assert_eq!(parse_rational("6/8").unwrap(), ratio(3, 4));
        assert_eq!(parse_rational("-3").unwrap(), int(-3));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("1/-2").is_err());
        assert!(parse_rational("x").is_err());
    }

    #[test]
    fn ratio_convention() {
        assert_eq!(
            ExtendedRational::ratio(&int(1), &int(0)),
            ExtendedRational::Infinite
        );
        assert_eq!(
            ExtendedRational::ratio(&int(0), &int(0)),
            ExtendedRational::zero()
        );
        assert_eq!(
            ExtendedRational::ratio(&ratio(1, 9), &ratio(1, 4)),
            ExtendedRational::Finite(ratio(4, 9))
        );
        assert!(ExtendedRational::Infinite > ExtendedRational::Finite(int(1_000_000)));
        assert_eq!(
            ExtendedRational::Infinite.weighted(&int(0)),
            ExtendedRational::zero()
        );
    }

    #[test]
    fn logs() {
        assert_eq!(floor_log2(&int(1)), 0);
        assert_eq!(floor_log2(&int(7)), 2);
        assert_eq!(floor_log2(&int(8)), 3);
        assert_eq!(floor_log2(&ratio(1, 3)), -2);
        assert_eq!(floor_log2(&ratio(256, 81)), 1);
        assert_eq!(exact_log2(&ratio(1, 8)), Some(-3));
        assert_eq!(exact_log2(&ratio(4, 9)), None);
        assert_eq!(ceil_int(&ratio(7, 2)), BigInt::from(4));
        assert_eq!(ceil_int(&ratio(-7, 2)), BigInt::from(-3));
        assert_eq!(ceil_int(&int(3)), BigInt::from(3));
    }
}
