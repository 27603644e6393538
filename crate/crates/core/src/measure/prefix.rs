//! Finite sets of cylinders (`Ã = ∪ Δ(s)`) and of rectangles `Δ(x) × Δ(y)`.

use std::fmt;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::bits::Bitstring;
use crate::error::Result;
use crate::measure::{JointMeasure, Measure};
use crate::rational::Rational;

/// A finite set of words, kept in enumeration order. Stands for the open set
/// `∪_{s ∈ A} Δ(s)`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PrefixSet(Vec<Bitstring>);

impl PrefixSet {
    pub fn new(elems: Vec<Bitstring>) -> Self {
        Self(elems)
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn iter(&self) -> impl Iterator<Item = &Bitstring> {
        self.0.iter()
    }

    pub fn elems(&self) -> &[Bitstring] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, s: Bitstring) {
        self.0.push(s);
    }

    pub fn max_len(&self) -> usize {
        self.0.iter().map(Bitstring::len).max().unwrap_or(0)
    }

    /// Prefix-minimal form: shortlex-sorted, duplicates and covered words
    /// dropped. The result is prefix-free, hence its cylinders are disjoint.
    pub fn reduced(&self) -> Self {
        let mut sorted = self.0.clone();
        sorted.sort();
        sorted.dedup();
        let mut kept: Vec<Bitstring> = Vec::new();
        for s in sorted {
            if !kept.iter().any(|k| k.is_prefix_of(&s)) {
                kept.push(s);
            }
        }
        Self(kept)
    }

    /// Reduced form with sibling pairs `s0, s1` merged into `s` until no pair
    /// remains. Two sets have the same open set iff their canonical forms are
    /// equal.
    pub fn canonical(&self) -> Self {
        let mut cur = self.reduced().0;
        loop {
            let mut merged = false;
            let mut next: Vec<Bitstring> = Vec::with_capacity(cur.len());
            let set: std::collections::BTreeSet<_> = cur.iter().cloned().collect();
            let mut skip = std::collections::BTreeSet::new();
            for s in &cur {
                if skip.contains(s) {
                    continue;
                }
                if let Some(p) = s.parent() {
                    let [a, b] = p.children();
                    if set.contains(&a) && set.contains(&b) {
                        skip.insert(a);
                        skip.insert(b);
                        next.push(p);
                        merged = true;
                        continue;
                    }
                }
                next.push(s.clone());
            }
            cur = Self(next).reduced().0;
            if !merged {
                return Self(cur);
            }
        }
    }

    /// Whether the point cylinder `Δ(w)` meets an element as a subset, i.e.
    /// some element is a prefix of `w`.
    pub fn contains_prefix_of(&self, w: &Bitstring) -> bool {
        self.0.iter().any(|s| s.is_prefix_of(w))
    }

    /// `Δ(w) ⊆ Ã`, decided exactly.
    pub fn covers(&self, w: &Bitstring) -> bool {
        if self.contains_prefix_of(w) {
            return true;
        }
        if self
            .0
            .iter()
            .any(|s| w.is_prefix_of(s) && s.len() > w.len())
        {
            let [a, b] = w.children();
            return self.covers(&a) && self.covers(&b);
        }
        false
    }

    /// `Ã ⊆ B̃`, decided exactly.
    pub fn is_subset_of(&self, other: &PrefixSet) -> bool {
        self.0.iter().all(|s| other.covers(s))
    }
}

impl FromIterator<Bitstring> for PrefixSet {
    fn from_iter<I: IntoIterator<Item = Bitstring>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

impl fmt::Display for PrefixSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "\"{s}\"")?;
        }
        f.write_str("}")
    }
}

/// `P(Ã)`, summed over the prefix-minimal reduction of `A`.
pub fn prefix_set_measure(m: &Measure, a: &PrefixSet) -> Result<Rational> {
    a.reduced()
        .iter()
        .try_fold(Rational::zero(), |acc, s| Ok(acc + m.eval(s)?))
}

/// The rectangle `Δ(x) × Δ(y)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(Bitstring, Bitstring)", into = "(Bitstring, Bitstring)")]
pub struct Rect {
    pub x: Bitstring,
    pub y: Bitstring,
}

impl From<(Bitstring, Bitstring)> for Rect {
    fn from((x, y): (Bitstring, Bitstring)) -> Self {
        Self { x, y }
    }
}

impl From<Rect> for (Bitstring, Bitstring) {
    fn from(r: Rect) -> Self {
        (r.x, r.y)
    }
}

impl Rect {
    pub fn new(x: Bitstring, y: Bitstring) -> Self {
        Self { x, y }
    }

    pub fn total_len(&self) -> usize {
        self.x.len() + self.y.len()
    }

    /// `Δ(other) ⊆ Δ(self)`.
    pub fn contains(&self, other: &Rect) -> bool {
        self.x.is_prefix_of(&other.x) && self.y.is_prefix_of(&other.y)
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.x.comparable(&other.x) && self.y.comparable(&other.y)
    }

    /// `self ∖ other` as disjoint rectangles, obtained by splitting `self`
    /// into children along whichever coordinate `other` is longer in.
    pub fn minus(&self, other: &Rect) -> Vec<Rect> {
        if !self.intersects(other) {
            return vec![self.clone()];
        }
        if other.contains(self) {
            return Vec::new();
        }
        let halves: [Rect; 2] = if other.x.len() > self.x.len() {
            self.x.children().map(|x| Rect::new(x, self.y.clone()))
        } else {
            self.y.children().map(|y| Rect::new(self.x.clone(), y))
        };
        halves.iter().flat_map(|h| h.minus(other)).collect()
    }
}

impl fmt::Display for Rect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(\"{}\",\"{}\")", self.x, self.y)
    }
}

/// A finite set of rectangles in enumeration order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RectSet(Vec<Rect>);

impl RectSet {
    pub fn new(rects: Vec<Rect>) -> Self {
        Self(rects)
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn rects(&self) -> &[Rect] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = &Rect> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, r: Rect) {
        self.0.push(r);
    }

    /// `(max |x|, max |y|)` over the elements.
    pub fn max_lens(&self) -> (usize, usize) {
        self.0
            .iter()
            .fold((0, 0), |(a, b), r| (a.max(r.x.len()), b.max(r.y.len())))
    }

    pub fn is_pairwise_disjoint(&self) -> bool {
        self.0
            .iter()
            .enumerate()
            .all(|(i, a)| self.0[i + 1..].iter().all(|b| !a.intersects(b)))
    }

    /// Drops rectangles covered by another element and merges sibling pairs
    /// in either coordinate. The open set is unchanged.
    pub fn canonical(&self) -> Self {
        let mut cur = self.0.clone();
        loop {
            cur.sort();
            cur.dedup();
            let snapshot = cur.clone();
            cur.retain(|r| !snapshot.iter().any(|o| o != r && o.contains(r)));
            let mut merged = None;
            'outer: for (i, a) in cur.iter().enumerate() {
                for (j, b) in cur.iter().enumerate().skip(i + 1) {
                    if let Some(m) = merge_siblings(a, b) {
                        merged = Some((i, j, m));
                        break 'outer;
                    }
                }
            }
            match merged {
                Some((i, j, m)) => {
                    cur.remove(j);
                    cur.remove(i);
                    cur.push(m);
                }
                None => return Self(cur),
            }
        }
    }
}

fn merge_siblings(a: &Rect, b: &Rect) -> Option<Rect> {
    let sib = |u: &Bitstring, v: &Bitstring| {
        u.len() == v.len() && !u.is_empty() && u.parent() == v.parent() && u != v
    };
    if a.y == b.y && sib(&a.x, &b.x) {
        Some(Rect::new(a.x.parent().unwrap(), a.y.clone()))
    } else if a.x == b.x && sib(&a.y, &b.y) {
        Some(Rect::new(a.x.clone(), a.y.parent().unwrap()))
    } else {
        None
    }
}

impl FromIterator<Rect> for RectSet {
    fn from_iter<I: IntoIterator<Item = Rect>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

impl fmt::Display for RectSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, r) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{r}")?;
        }
        f.write_str("}")
    }
}

/// A pairwise-disjoint rectangle set with the same union as `t`.
///
/// Elements are processed by total length `|x| + |y|`, ties in enumeration
/// order; each is kept minus the union of the rectangles already kept, so a
/// covered element vanishes and a partially covered one contributes its
/// residue as child rectangles.
pub fn nonoverlapping_cover(t: &RectSet) -> RectSet {
    let mut order: Vec<&Rect> = t.iter().collect();
    order.sort_by_key(|r| r.total_len());
    let mut kept: Vec<Rect> = Vec::new();
    for r in order {
        let mut pieces = vec![r.clone()];
        for k in &kept {
            pieces = pieces.iter().flat_map(|p| p.minus(k)).collect();
            if pieces.is_empty() {
                break;
            }
        }
        kept.extend(pieces);
    }
    RectSet(kept)
}

/// `P(B̃)` for a rectangle set, summed over its non-overlapping cover.
pub fn rect_set_measure(j: &JointMeasure, b: &RectSet) -> Result<Rational> {
    nonoverlapping_cover(b)
        .iter()
        .try_fold(Rational::zero(), |acc, r| Ok(acc + j.eval(&r.x, &r.y)?))
}
