//! Exhaustive leaf enumeration: an open set built from finitely many
//! rectangles is represented exactly by the leaf cells `Δ(x) × Δ(y)`,
//! `|x| = lx`, `|y| = ly`, it contains, provided no rectangle is finer than
//! the grid.

use num_traits::Zero;
use rayon::prelude::*;

use crate::bits::Bitstring;
use crate::error::{LabError, Result};
use crate::measure::{JointMeasure, Rect, RectSet};
use crate::rational::Rational;

const MAX_GRID_BITS: usize = 22;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LeafGrid {
    lx: usize,
    ly: usize,
    cells: Vec<bool>,
}

impl LeafGrid {
    pub fn new(lx: usize, ly: usize) -> Result<Self> {
        if lx + ly > MAX_GRID_BITS {
            return Err(LabError::DepthExceeded {
                len: lx + ly,
                cap: MAX_GRID_BITS,
            });
        }
        Ok(Self {
            lx,
            ly,
            cells: vec![false; 1 << (lx + ly)],
        })
    }

    pub fn from_rects(rects: &RectSet, lx: usize, ly: usize) -> Result<Self> {
        let mut g = Self::new(lx, ly)?;
        for r in rects.iter() {
            g.insert(r)?;
        }
        Ok(g)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.lx, self.ly)
    }

    pub fn insert(&mut self, r: &Rect) -> Result<()> {
        if r.x.len() > self.lx {
            return Err(LabError::DepthExceeded {
                len: r.x.len(),
                cap: self.lx,
            });
        }
        if r.y.len() > self.ly {
            return Err(LabError::DepthExceeded {
                len: r.y.len(),
                cap: self.ly,
            });
        }
        let sx = self.lx - r.x.len();
        let sy = self.ly - r.y.len();
        let x0 = (r.x.index() as usize) << sx;
        let y0 = (r.y.index() as usize) << sy;
        for ix in x0..x0 + (1 << sx) {
            let row = ix << self.ly;
            self.cells[row + y0..row + y0 + (1 << sy)].fill(true);
        }
        Ok(())
    }

    pub fn contains(&self, x: &Bitstring, y: &Bitstring) -> bool {
        debug_assert!(x.len() == self.lx && y.len() == self.ly);
        self.cells[((x.index() as usize) << self.ly) | y.index() as usize]
    }

    fn zip(&self, other: &Self, f: impl Fn(bool, bool) -> bool) -> Self {
        assert_eq!(self.dims(), other.dims(), "grids of different shape");
        Self {
            lx: self.lx,
            ly: self.ly,
            cells: self
                .cells
                .iter()
                .zip(&other.cells)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn union(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a && b)
    }

    pub fn difference(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a && !b)
    }

    pub fn is_empty(&self) -> bool {
        !self.cells.iter().any(|&c| c)
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.difference(other).is_empty()
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// Leaf cells in the set, in index order.
    pub fn leaves(&self) -> impl Iterator<Item = (Bitstring, Bitstring)> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &c)| c)
            .map(|(i, _)| {
                (
                    Bitstring::from_index((i >> self.ly) as u64, self.lx),
                    Bitstring::from_index((i & ((1 << self.ly) - 1)) as u64, self.ly),
                )
            })
    }

    /// Exact `P` of the set: the sum over its leaf cells.
    pub fn measure(&self, j: &JointMeasure) -> Result<Rational> {
        let leaves: Vec<_> = self.leaves().collect();
        let parts: Result<Vec<Rational>> = leaves.par_iter().map(|(x, y)| j.eval(x, y)).collect();
        Ok(parts?.into_iter().fold(Rational::zero(), |a, b| a + b))
    }

    /// The x-section at leaf `y`: all leaf `x` with `(x, y)` in the set.
    pub fn section(&self, y: &Bitstring) -> Vec<Bitstring> {
        debug_assert!(y.len() == self.ly);
        Bitstring::all_of_length(self.lx)
            .filter(|x| self.contains(x, y))
            .collect()
    }
}
