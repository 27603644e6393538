//! Measures given by explicit leaf masses at a fixed depth.
//!
//! Every node up to the table depth is stored, so a single perturbed value
//! shows up as a local additivity failure rather than being silently
//! re-summed. Below the table depth mass is split uniformly.

use num_traits::{Signed, Zero};

use crate::bits::Bitstring;
use crate::error::{LabError, Result};
use crate::rational::{half_pow, Rational};

#[derive(Clone, Debug, PartialEq)]
pub struct TableMeasure {
    depth: usize,
    /// `levels[k][i]` is the mass of the length-`k` word with index `i`.
    levels: Vec<Vec<Rational>>,
}

impl TableMeasure {
    /// `leaves` are indexed by the binary value of the depth-`depth` word.
    pub fn from_leaves(depth: usize, leaves: Vec<Rational>) -> Result<Self> {
        if depth > 24 {
            return Err(LabError::InvalidMeasure(format!(
                "table depth {depth} too large"
            )));
        }
        if leaves.len() != 1 << depth {
            return Err(LabError::InvalidMeasure(format!(
                "table of depth {depth} needs {} leaves, got {}",
                1u64 << depth,
                leaves.len()
            )));
        }
        if let Some(neg) = leaves.iter().find(|v| v.is_negative()) {
            return Err(LabError::InvalidMeasure(format!(
                "negative leaf mass {neg}"
            )));
        }
        let mut levels = vec![leaves];
        for _ in 0..depth {
            let below = levels.last().unwrap();
            let above = below.chunks(2).map(|p| &p[0] + &p[1]).collect();
            levels.push(above);
        }
        levels.reverse();
        Ok(Self { depth, levels })
    }

    /// Returns a copy with the stored value at `node` replaced, leaving every
    /// other stored value alone. Used to build deliberately inconsistent
    /// tables.
    pub fn with_node_value(&self, node: &Bitstring, value: Rational) -> Result<Self> {
        if node.len() > self.depth {
            return Err(LabError::DepthExceeded {
                len: node.len(),
                cap: self.depth,
            });
        }
        let mut out = self.clone();
        out.levels[node.len()][node.index() as usize] = value;
        Ok(out)
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn leaves(&self) -> &[Rational] {
        &self.levels[self.depth]
    }

    pub fn total(&self) -> &Rational {
        &self.levels[0][0]
    }

    pub fn eval(&self, x: &Bitstring) -> Rational {
        if x.len() <= self.depth {
            self.levels[x.len()][x.index() as usize].clone()
        } else {
            let top = &self.levels[self.depth][x.prefix(self.depth).index() as usize];
            top * half_pow(x.len() - self.depth)
        }
    }
}

/// Leaf masses on rectangles `Δ(x) × Δ(y)` with `|x| = depth_x`, `|y| = depth_y`.
#[derive(Clone, Debug, PartialEq)]
pub struct JointTable {
    depth_x: usize,
    depth_y: usize,
    /// `levels[lx][ly][(ix << ly) | iy]`.
    levels: Vec<Vec<Vec<Rational>>>,
}

impl JointTable {
    /// `leaves[(ix << depth_y) | iy]` is the mass of the leaf rectangle.
    pub fn from_leaves(depth_x: usize, depth_y: usize, leaves: Vec<Rational>) -> Result<Self> {
        if depth_x + depth_y > 24 {
            return Err(LabError::InvalidMeasure("joint table too deep".into()));
        }
        if leaves.len() != 1 << (depth_x + depth_y) {
            return Err(LabError::InvalidMeasure(format!(
                "joint table of depths ({depth_x},{depth_y}) needs {} leaves, got {}",
                1u64 << (depth_x + depth_y),
                leaves.len()
            )));
        }
        if let Some(neg) = leaves.iter().find(|v| v.is_negative()) {
            return Err(LabError::InvalidMeasure(format!(
                "negative leaf mass {neg}"
            )));
        }
        let mut levels: Vec<Vec<Vec<Rational>>> = vec![vec![Vec::new(); depth_y + 1]; depth_x + 1];
        levels[depth_x][depth_y] = leaves;
        for lx in (0..=depth_x).rev() {
            for ly in (0..=depth_y).rev() {
                if lx == depth_x && ly == depth_y {
                    continue;
                }
                let mut cur = vec![Rational::zero(); 1 << (lx + ly)];
                if lx < depth_x {
                    let below = &levels[lx + 1][ly];
                    for ix in 0..(1usize << lx) {
                        for iy in 0..(1usize << ly) {
                            let a = &below[((2 * ix) << ly) | iy];
                            let b = &below[((2 * ix + 1) << ly) | iy];
                            cur[(ix << ly) | iy] = a + b;
                        }
                    }
                } else {
                    let below = &levels[lx][ly + 1];
                    for ix in 0..(1usize << lx) {
                        for iy in 0..(1usize << ly) {
                            let a = &below[(ix << (ly + 1)) | (2 * iy)];
                            let b = &below[(ix << (ly + 1)) | (2 * iy + 1)];
                            cur[(ix << ly) | iy] = a + b;
                        }
                    }
                }
                levels[lx][ly] = cur;
            }
        }
        Ok(Self {
            depth_x,
            depth_y,
            levels,
        })
    }

    pub fn depths(&self) -> (usize, usize) {
        (self.depth_x, self.depth_y)
    }

    pub fn total(&self) -> &Rational {
        &self.levels[0][0][0]
    }

    pub fn eval(&self, x: &Bitstring, y: &Bitstring) -> Rational {
        let lx = x.len().min(self.depth_x);
        let ly = y.len().min(self.depth_y);
        let idx = ((x.prefix(lx).index() as usize) << ly) | y.prefix(ly).index() as usize;
        let v = &self.levels[lx][ly][idx];
        let extra = (x.len() - lx) + (y.len() - ly);
        if extra == 0 {
            v.clone()
        } else {
            v * half_pow(extra)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::bs;
    use crate::rational::ratio;

    #[test]
    fn table_sums_and_refines() {
        let t =
            TableMeasure::from_leaves(2, vec![ratio(1, 8), ratio(3, 8), ratio(1, 4), ratio(1, 4)])
                .unwrap();
        assert_eq!(t.eval(&bs("")), ratio(1, 1));
        assert_eq!(t.eval(&bs("0")), ratio(1, 2));
        assert_eq!(t.eval(&bs("01")), ratio(3, 8));
        assert_eq!(t.eval(&bs("011")), ratio(3, 16));
        assert_eq!(t.eval(&bs("0110")), ratio(3, 32));
    }

    #[test]
    fn table_rejects_bad_shapes() {
        assert!(TableMeasure::from_leaves(2, vec![ratio(1, 1)]).is_err());
        assert!(TableMeasure::from_leaves(1, vec![ratio(2, 1), ratio(-1, 1)]).is_err());
    }

    #[test]
    fn joint_table_marginal_sums() {
        // all mass on Δ(0) × Δ(1)
        let leaves = vec![ratio(0, 1), ratio(1, 1), ratio(0, 1), ratio(0, 1)];
        let t = JointTable::from_leaves(1, 1, leaves).unwrap();
        assert_eq!(t.eval(&bs("0"), &bs("")), ratio(1, 1));
        assert_eq!(t.eval(&bs(""), &bs("1")), ratio(1, 1));
        assert_eq!(t.eval(&bs("1"), &bs("")), ratio(0, 1));
        assert_eq!(t.eval(&bs("01"), &bs("10")), ratio(1, 4));
    }
}
