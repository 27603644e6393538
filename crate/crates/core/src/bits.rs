//! Finite binary words indexing cylinder sets.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{LabError, Result};

/// A finite binary word `s`, standing for the cylinder of all infinite
/// sequences that extend it. The empty word is the whole space.
///
/// Ordering is shortlex: shorter words first, then lexicographic.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Bitstring(Vec<bool>);

impl Bitstring {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    /// `b` repeated `n` times.
    pub fn repeat(b: bool, n: usize) -> Self {
        Self(vec![b; n])
    }

    /// The word of length `len` whose bits spell `index` in binary, most
    /// significant bit first.
    pub fn from_index(index: u64, len: usize) -> Self {
        debug_assert!(len <= 64);
        Self(
            (0..len)
                .map(|i| (index >> (len - 1 - i)) & 1 == 1)
                .collect(),
        )
    }

    /// Inverse of [`Bitstring::from_index`].
    pub fn index(&self) -> u64 {
        debug_assert!(self.0.len() <= 64);
        self.0.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn bit(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn child(&self, b: bool) -> Self {
        let mut v = self.0.clone();
        v.push(b);
        Self(v)
    }

    pub fn children(&self) -> [Self; 2] {
        [self.child(false), self.child(true)]
    }

    pub fn parent(&self) -> Option<Self> {
        if self.0.is_empty() {
            None
        } else {
            Some(Self(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    pub fn prefix(&self, len: usize) -> Self {
        Self(self.0[..len.min(self.0.len())].to_vec())
    }

    pub fn concat(&self, other: &Self) -> Self {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Self(v)
    }

    /// `self ⊑ other`.
    pub fn is_prefix_of(&self, other: &Self) -> bool {
        other.0.len() >= self.0.len() && other.0[..self.0.len()] == self.0[..]
    }

    /// Whether the two cylinders intersect, i.e. one word extends the other.
    pub fn comparable(&self, other: &Self) -> bool {
        self.is_prefix_of(other) || other.is_prefix_of(self)
    }

    /// All prefixes from the empty word up to and including `self`.
    pub fn prefixes(&self) -> impl Iterator<Item = Bitstring> + '_ {
        (0..=self.0.len()).map(move |k| self.prefix(k))
    }

    /// All words of exactly `len` bits in lexicographic order.
    pub fn all_of_length(len: usize) -> impl Iterator<Item = Bitstring> {
        assert!(len < 63, "enumeration depth {len} too large");
        (0..(1u64 << len)).map(move |i| Bitstring::from_index(i, len))
    }

    /// All words of length at most `max_len`, in shortlex order.
    pub fn all_up_to(max_len: usize) -> impl Iterator<Item = Bitstring> {
        (0..=max_len).flat_map(Bitstring::all_of_length)
    }

    /// All extensions of `self` of exactly `len` bits (empty if `len < |self|`).
    pub fn extensions(&self, len: usize) -> impl Iterator<Item = Bitstring> + '_ {
        let extra = len.checked_sub(self.len());
        let count = extra.map_or(0, |e| 1u64 << e);
        (0..count).map(move |i| self.concat(&Bitstring::from_index(i, extra.unwrap_or(0))))
    }
}

impl Ord for Bitstring {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .len()
            .cmp(&other.0.len())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Bitstring {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Bitstring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Bitstring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            f.write_str("λ")
        } else {
            write!(f, "\"{self}\"")
        }
    }
}

impl FromStr for Bitstring {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(LabError::Parse(format!("invalid bit {c:?} in {s:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Bitstring)
    }
}

impl Serialize for Bitstring {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Bitstring {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Shorthand for parsing a literal in tests and fixtures. Panics on bad input.
pub fn bs(s: &str) -> Bitstring {
    s.parse().expect("valid bitstring literal")
}
