//! Exhaustive Kolmogorov-consistency checks up to a given depth.

use num_traits::{One, Signed};
use serde::Serialize;

use crate::bits::Bitstring;
use crate::error::{LabError, Result};
use crate::measure::{JointMeasure, Measure};
use crate::rational::{serde_rational, Rational};
use crate::report::{Check, Relation, Verdict};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Identity {
    /// `P(λ) = 1`.
    Total,
    /// `P(s) ≥ 0`.
    Nonnegative,
    /// `P(x) = P(x0) + P(x1)`.
    Split,
    /// `P(x,y) = P(x0,y) + P(x1,y)`.
    SplitX,
    /// `P(x,y) = P(x,y0) + P(x,y1)`.
    SplitY,
    /// `P(x,y) = Σ_{i,j} P(xi,yj)`.
    SplitXy,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub x: Bitstring,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<Bitstring>,
    pub identity: Identity,
    /// Value at the node.
    #[serde(with = "serde_rational")]
    pub lhs: Rational,
    /// Sum over the children (or the required value).
    #[serde(with = "serde_rational")]
    pub rhs: Rational,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConsistencyReport {
    pub depth: usize,
    pub nodes_checked: u64,
    pub violations: Vec<Violation>,
    #[serde(skip)]
    checks: Vec<Check>,
}

impl ConsistencyReport {
    fn new(depth: usize, nodes_checked: u64, violations: Vec<Violation>) -> Self {
        let checks = vec![Check::decided(
            "additivity violations",
            violations.len().to_string(),
            Relation::Eq,
            "0",
            violations.is_empty(),
        )];
        Self {
            depth,
            nodes_checked,
            violations,
            checks,
        }
    }

    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }
}

impl Verdict for ConsistencyReport {
    fn checks(&self) -> &[Check] {
        &self.checks
    }
}

fn require_depth(depth: usize, cap: usize) -> Result<()> {
    if depth > cap {
        Err(LabError::DepthExceeded { len: depth, cap })
    } else {
        Ok(())
    }
}

/// Checks `P(λ) = 1`, non-negativity at every `|x| ≤ depth`, and
/// `P(x) = P(x0) + P(x1)` at every `|x| < depth`.
pub fn check_consistency(m: &Measure, depth: usize) -> Result<ConsistencyReport> {
    require_depth(depth, m.depth_cap())?;
    let mut violations = Vec::new();
    let total = m.eval(&Bitstring::empty())?;
    if !total.is_one() {
        violations.push(Violation {
            x: Bitstring::empty(),
            y: None,
            identity: Identity::Total,
            lhs: total,
            rhs: Rational::one(),
        });
    }
    let mut nodes = 0u64;
    for x in Bitstring::all_up_to(depth) {
        nodes += 1;
        let v = m.eval(&x)?;
        if v.is_negative() {
            violations.push(Violation {
                x: x.clone(),
                y: None,
                identity: Identity::Nonnegative,
                lhs: v.clone(),
                rhs: Rational::from_integer(0.into()),
            });
        }
        if x.len() < depth {
            let [a, b] = x.children();
            let sum = m.eval(&a)? + m.eval(&b)?;
            if sum != v {
                violations.push(Violation {
                    x,
                    y: None,
                    identity: Identity::Split,
                    lhs: v,
                    rhs: sum,
                });
            }
        }
    }
    Ok(ConsistencyReport::new(depth, nodes, violations))
}

/// Position of `x` in shortlex order over all words of length `≤ depth`.
fn slot(x: &Bitstring) -> usize {
    (1usize << x.len()) - 1 + x.index() as usize
}

/// Joint version: `P(λ,λ) = 1`, non-negativity at every `|x|,|y| ≤ depth`,
/// and the three additivity identities at every `|x|,|y| < depth`.
///
/// Walks the `y`-tree depth first so each row `x ↦ P(x, y)` is evaluated
/// once; sibling subtrees run in parallel.
pub fn check_joint_consistency(j: &JointMeasure, depth: usize) -> Result<ConsistencyReport> {
    let (cx, cy) = j.depth_caps();
    require_depth(depth, cx.min(cy))?;
    let xs: Vec<Bitstring> = Bitstring::all_up_to(depth).collect();

    let mut violations = Vec::new();
    let total = j.eval(&Bitstring::empty(), &Bitstring::empty())?;
    if !total.is_one() {
        violations.push(Violation {
            x: Bitstring::empty(),
            y: Some(Bitstring::empty()),
            identity: Identity::Total,
            lhs: total,
            rhs: Rational::one(),
        });
    }
    let root = Bitstring::empty();
    let row = Row::new(j, &root, &xs, depth)?;
    violations.extend(visit(j, &xs, depth, &root, &row)?);
    let nodes = (xs.len() * xs.len()) as u64;
    Ok(ConsistencyReport::new(depth, nodes, violations))
}

/// `P(x0, y) + P(x1, y)` for every `|x| < depth`, indexed like the row.
fn split_sums(row: &[Rational], xs: &[Bitstring], depth: usize) -> Vec<Rational> {
    xs.iter()
        .take_while(|x| x.len() < depth)
        .map(|x| {
            let [x0, x1] = x.children();
            &row[slot(&x0)] + &row[slot(&x1)]
        })
        .collect()
}

struct Row {
    values: Vec<Rational>,
    splits: Vec<Rational>,
}

impl Row {
    fn new(j: &JointMeasure, y: &Bitstring, xs: &[Bitstring], depth: usize) -> Result<Self> {
        let values = j.row(y, xs)?;
        let splits = split_sums(&values, xs, depth);
        Ok(Self { values, splits })
    }
}

fn visit(
    j: &JointMeasure,
    xs: &[Bitstring],
    depth: usize,
    y: &Bitstring,
    here: &Row,
) -> Result<Vec<Violation>> {
    let mut out = Vec::new();
    for (x, v) in xs.iter().zip(&here.values) {
        if v.is_negative() {
            out.push(Violation {
                x: x.clone(),
                y: Some(y.clone()),
                identity: Identity::Nonnegative,
                lhs: v.clone(),
                rhs: Rational::from_integer(0.into()),
            });
        }
    }
    if y.len() == depth {
        return Ok(out);
    }
    let [y0, y1] = y.children();
    let (r0, r1) = rayon::join(
        || Row::new(j, &y0, xs, depth),
        || Row::new(j, &y1, xs, depth),
    );
    let (r0, r1) = (r0?, r1?);
    for (i, x) in xs.iter().enumerate().take_while(|(_, x)| x.len() < depth) {
        let v = &here.values[i];
        let sy = &r0.values[i] + &r1.values[i];
        let sxy = &r0.splits[i] + &r1.splits[i];
        for (identity, sum) in [
            (Identity::SplitX, &here.splits[i]),
            (Identity::SplitY, &sy),
            (Identity::SplitXy, &sxy),
        ] {
            if sum != v {
                out.push(Violation {
                    x: x.clone(),
                    y: Some(y.clone()),
                    identity,
                    lhs: v.clone(),
                    rhs: sum.clone(),
                });
            }
        }
    }
    let (a, b) = rayon::join(
        || visit(j, xs, depth, &y0, &r0),
        || visit(j, xs, depth, &y1, &r1),
    );
    out.extend(a?);
    out.extend(b?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::bs;
    use crate::measure::{JointTable, TableMeasure};
    use crate::rational::{int, ratio};

    #[test]
    fn uniform_passes() {
        let r = check_consistency(&Measure::uniform(), 10).unwrap();
        assert!(r.pass());
        assert_eq!(r.nodes_checked, 2047);
        assert!(
            check_consistency(&Measure::bernoulli(ratio(1, 3)).unwrap(), 10)
                .unwrap()
                .pass()
        );
    }

    #[test]
    fn perturbed_leaf_flags_its_parent() {
        let leaves = vec![ratio(1, 8); 8];
        let t = TableMeasure::from_leaves(3, leaves).unwrap();
        let bent = t
            .with_node_value(&bs("010"), ratio(1, 8) + ratio(1, 100))
            .unwrap();
        let r = check_consistency(&Measure::table(bent), 3).unwrap();
        assert_eq!(r.violations.len(), 1);
        let v = &r.violations[0];
        assert_eq!(v.x, bs("01"));
        assert_eq!(v.identity, Identity::Split);
        assert_eq!(v.lhs, ratio(1, 4));
        assert_eq!(v.rhs, ratio(1, 4) + ratio(1, 100));
    }

    #[test]
    fn unnormalised_table_flags_total() {
        let t = TableMeasure::from_leaves(1, vec![ratio(1, 2), ratio(1, 4)]).unwrap();
        let r = check_consistency(&Measure::table(t), 2).unwrap();
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].identity, Identity::Total);
    }

    #[test]
    fn depth_beyond_cap_is_an_error() {
        let m = Measure::uniform().with_depth_cap(4);
        assert!(matches!(
            check_consistency(&m, 5),
            Err(LabError::DepthExceeded { .. })
        ));
    }

    #[test]
    fn joint_tables_pass() {
        let leaves = (1..=16).map(|k| ratio(k, 136)).collect();
        let j = JointMeasure::table(JointTable::from_leaves(2, 2, leaves).unwrap());
        let r = check_joint_consistency(&j, 4).unwrap();
        assert!(r.pass(), "{:?}", r.violations);
        assert!(check_joint_consistency(&JointMeasure::uniform_product(), 5)
            .unwrap()
            .pass());
        let bad = JointMeasure::table(JointTable::from_leaves(0, 0, vec![int(2)]).unwrap());
        assert!(!check_joint_consistency(&bad, 2).unwrap().pass());
    }

    #[test]
    fn bent_detection_factors_break_the_y_split() {
        use crate::example::{ExampleMeasure, ExampleParams, MachineTable};
        let t = MachineTable::from_triggers(1, [(1, bs("1"))]).unwrap();
        let bent = ExampleMeasure::new(ExampleParams::new(ratio(1, 2), t))
            .unwrap()
            .with_child_factors(ratio(1, 2), ratio(1, 2));
        let r = check_joint_consistency(&JointMeasure::example(bent), 4).unwrap();
        assert!(!r.pass());
        // each conditional is still a probability, so only the y-direction breaks
        assert!(r.violations.iter().all(|v| v.identity != Identity::SplitX));
        let v = r
            .violations
            .iter()
            .find(|v| v.identity == Identity::SplitY && v.x == bs("00"))
            .unwrap();
        assert_eq!(v.y, Some(bs("1")));
        assert_eq!(v.lhs, ratio(1, 8));
        assert_eq!(v.rhs, ratio(1, 16));
    }
}
