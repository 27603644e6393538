//! Likelihood-ratio processes on the binary filtration and the exact checks
//! that go with them: the submartingale property, Doob's maximal inequality,
//! approximation sandwiches, and ratio certificates.

mod approx;
mod bounds;

pub use approx::{
    check_effective_approximation, ApproxReport, ApproximationScheme, GFunction, GValue,
    SandwichViolation,
};
pub use bounds::{
    check_bounded_in_probability, classify, equivalence_certificate, joint_equivalence_certificate,
    BoundedProbReport, ClassificationReport, EquivalenceReport, ProbBoundCertificate, Regime,
};

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_traits::Zero;
use rayon::prelude::*;
use serde::Serialize;

use crate::bits::Bitstring;
use crate::error::{LabError, Result};
use crate::measure::Measure;
use crate::rational::{ExtendedRational, Rational};
use crate::report::{Check, Relation, Verdict};

/// `Q(x)/P(x)` with `a/0 = ∞` for `a ≠ 0` and `0/0 = 0`.
pub fn likelihood_ratio(p: &Measure, q: &Measure, x: &Bitstring) -> Result<ExtendedRational> {
    Ok(ExtendedRational::ratio(&q.eval(x)?, &p.eval(x)?))
}

type ProcessFn = Arc<dyn Fn(&Bitstring) -> ExtendedRational + Send + Sync>;

#[derive(Clone)]
enum Source {
    Ratio { p: Measure, q: Measure },
    Table(Arc<BTreeMap<Bitstring, ExtendedRational>>),
    Func(ProcessFn),
}

/// An adapted process `r_n(x)`, `|x| = n`, constant on depth-`n` cylinders.
#[derive(Clone)]
pub struct RatioProcess {
    source: Source,
}

impl fmt::Debug for RatioProcess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.source {
            Source::Ratio { p, q } => write!(f, "Ratio({:?} / {:?})", q.kind(), p.kind()),
            Source::Table(t) => write!(f, "Table({} nodes)", t.len()),
            Source::Func(_) => f.write_str("Func"),
        }
    }
}

impl RatioProcess {
    /// `r_n = Q/P` on depth-`n` cylinders.
    pub fn likelihood(p: Measure, q: Measure) -> Self {
        Self {
            source: Source::Ratio { p, q },
        }
    }

    /// Explicit values; evaluating a node missing from the table is an error.
    pub fn table(values: BTreeMap<Bitstring, ExtendedRational>) -> Self {
        Self {
            source: Source::Table(Arc::new(values)),
        }
    }

    pub fn from_fn(f: impl Fn(&Bitstring) -> ExtendedRational + Send + Sync + 'static) -> Self {
        Self {
            source: Source::Func(Arc::new(f)),
        }
    }

    /// `r_{|x|}(x)`.
    pub fn value(&self, x: &Bitstring) -> Result<ExtendedRational> {
        match &self.source {
            Source::Ratio { p, q } => likelihood_ratio(p, q, x),
            Source::Table(t) => t
                .get(x)
                .cloned()
                .ok_or_else(|| LabError::Precondition(format!("process undefined at \"{x}\""))),
            Source::Func(f) => Ok(f(x)),
        }
    }

    fn nonnegative(&self, x: &Bitstring) -> Result<ExtendedRational> {
        let v = self.value(x)?;
        if v.is_negative() {
            return Err(LabError::NegativeValue {
                at: x.clone(),
                value: v.to_string(),
            });
        }
        Ok(v)
    }
}

fn require_depth(depth: usize, cap: usize) -> Result<()> {
    if depth > cap {
        return Err(LabError::DepthExceeded { len: depth, cap });
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct NodeInequality {
    pub x: Bitstring,
    /// `P(x0) r(x0) + P(x1) r(x1)`.
    pub lhs: ExtendedRational,
    /// `P(x) r(x)`.
    pub rhs: ExtendedRational,
}

#[derive(Clone, Debug, Serialize)]
pub struct SubmartingaleReport {
    pub depth: usize,
    pub nodes_checked: u64,
    pub null_nodes_skipped: u64,
    pub strict_nodes: u64,
    pub martingale: bool,
    pub violations: Vec<NodeInequality>,
    pub checks: Vec<Check>,
}

impl Verdict for SubmartingaleReport {
    fn checks(&self) -> &[Check] {
        &self.checks
    }
}

/// Checks `P(x0) r(x0) + P(x1) r(x1) ≥ P(x) r(x)` at every `|x| < depth`
/// with `P(x) > 0`; equality everywhere means a martingale.
pub fn check_submartingale(
    p: &Measure,
    proc: &RatioProcess,
    depth: usize,
) -> Result<SubmartingaleReport> {
    require_depth(depth, p.depth_cap())?;
    let nodes: Vec<Bitstring> = match depth {
        0 => Vec::new(),
        d => Bitstring::all_up_to(d - 1).collect(),
    };
    // (checked, strict, violation)
    let results: Vec<(bool, bool, Option<NodeInequality>)> = nodes
        .par_iter()
        .map(|x| -> Result<_> {
            let px = p.eval(x)?;
            if px.is_zero() {
                return Ok((false, false, None));
            }
            let [x0, x1] = x.children();
            let lhs = proc
                .value(&x0)?
                .weighted(&p.eval(&x0)?)
                .add(&proc.value(&x1)?.weighted(&p.eval(&x1)?));
            let rhs = proc.value(x)?.weighted(&px);
            let strict = lhs > rhs;
            let bad = (lhs < rhs).then(|| NodeInequality {
                x: x.clone(),
                lhs,
                rhs,
            });
            Ok((true, strict, bad))
        })
        .collect::<Result<_>>()?;

    let checked = results.iter().filter(|r| r.0).count() as u64;
    let strict_nodes = results.iter().filter(|r| r.1).count() as u64;
    let violations: Vec<_> = results.into_iter().filter_map(|r| r.2).collect();
    let martingale = violations.is_empty() && strict_nodes == 0;
    let checks = vec![Check::decided(
        "submartingale inequality violations",
        violations.len().to_string(),
        Relation::Eq,
        "0",
        violations.is_empty(),
    )];
    Ok(SubmartingaleReport {
        depth,
        nodes_checked: checked,
        null_nodes_skipped: nodes.len() as u64 - checked,
        strict_nodes,
        martingale,
        violations,
        checks,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DoobLevel {
    pub threshold: u64,
    /// `P(M̃_{m,n})`.
    pub exceed_mass: ExtendedRational,
    /// `E(|r_n|)/m`.
    pub bound: ExtendedRational,
    pub vacuous: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chain: Option<DoobChain>,
}

/// `P(Ṽ) ≤ P(Ũ) = P(Ũ′) = P(M̃)` at threshold `g(m)`.
#[derive(Clone, Debug, Serialize)]
pub struct DoobChain {
    pub approx_mass: ExtendedRational,
    pub g_sup_mass: ExtendedRational,
    pub sup_g_mass: ExtendedRational,
}

#[derive(Clone, Debug, Serialize)]
pub struct DoobReport {
    pub depth: usize,
    pub expectation: ExtendedRational,
    pub expectation_infinite: bool,
    pub levels: Vec<DoobLevel>,
    pub checks: Vec<Check>,
}

impl Verdict for DoobReport {
    fn checks(&self) -> &[Check] {
        &self.checks
    }
}

struct Leaf {
    weight: Rational,
    /// `sup_{1≤i≤n} r_i`.
    sup: ExtendedRational,
    last: ExtendedRational,
    path: Vec<ExtendedRational>,
}

/// Exhaustive Doob check at depth `n`: for each threshold `m`,
/// `P(sup_{1≤i≤n} r_i > m) ≤ E(|r_n|)/m`. With a scheme, also the chain
/// through the approximating sets.
pub fn doob_check(
    p: &Measure,
    proc: &RatioProcess,
    depth: usize,
    thresholds: &[u64],
    scheme: Option<&ApproximationScheme>,
) -> Result<DoobReport> {
    require_depth(depth, p.depth_cap())?;
    if depth == 0 {
        return Err(LabError::Precondition("doob check needs depth >= 1".into()));
    }
    if thresholds.contains(&0) {
        return Err(LabError::Precondition("thresholds must be positive".into()));
    }
    let leaves: Vec<Bitstring> = Bitstring::all_of_length(depth).collect();
    let data: Vec<Leaf> = leaves
        .par_iter()
        .map(|x| -> Result<Leaf> {
            let path = (1..=depth)
                .map(|i| proc.nonnegative(&x.prefix(i)))
                .collect::<Result<Vec<_>>>()?;
            Ok(Leaf {
                weight: p.eval(x)?,
                sup: path
                    .iter()
                    .max()
                    .cloned()
                    .unwrap_or_else(ExtendedRational::zero),
                last: path[depth - 1].clone(),
                path,
            })
        })
        .collect::<Result<_>>()?;

    let expectation = data
        .iter()
        .filter(|l| !l.weight.is_zero())
        .fold(ExtendedRational::zero(), |acc, l| {
            acc.add(&l.last.abs().weighted(&l.weight))
        });
    let expectation_infinite = expectation.is_infinite();

    let mut levels = Vec::new();
    let mut checks = Vec::new();
    for &m in thresholds {
        let mr = Rational::from_integer(m.into());
        let m_ext = ExtendedRational::Finite(mr.clone());
        let mass_where = |pred: &dyn Fn(&Leaf) -> bool| -> Rational {
            data.iter()
                .filter(|l| pred(l))
                .fold(Rational::zero(), |a, l| a + &l.weight)
        };
        let exceed: ExtendedRational = mass_where(&|l| l.sup > m_ext).into();
        let bound = expectation.div_finite(&mr);
        let mut check = Check::compare(
            format!("P(sup r_i > {m}) <= E|r_n|/{m}"),
            &exceed,
            Relation::Le,
            &bound,
        );
        if expectation_infinite {
            check = check.with_note("expectation is infinite; the bound is vacuous");
        }
        checks.push(check);

        let chain = match scheme {
            None => None,
            Some(s) => {
                let gm = s.g.eval(&m_ext)?;
                let mut approx_mass = Rational::zero();
                let mut g_sup_mass = Rational::zero();
                let mut sup_g_mass = Rational::zero();
                for (x, l) in leaves.iter().zip(&data) {
                    let mut sup_f = GValue::NegInf;
                    let mut sup_g = GValue::NegInf;
                    for (i, r) in l.path.iter().enumerate() {
                        sup_f = sup_f.max(s.f_at(&x.prefix(i + 1))?);
                        sup_g = sup_g.max(s.g.eval(r)?);
                    }
                    if gm < sup_f {
                        approx_mass += &l.weight;
                    }
                    if gm < sup_g {
                        sup_g_mass += &l.weight;
                    }
                    if gm < s.g.eval(&l.sup)? {
                        g_sup_mass += &l.weight;
                    }
                }
                let chain = DoobChain {
                    approx_mass: approx_mass.into(),
                    g_sup_mass: g_sup_mass.into(),
                    sup_g_mass: sup_g_mass.into(),
                };
                checks.push(Check::compare(
                    format!("P(V~) <= P(U~) at g({m})"),
                    &chain.approx_mass,
                    Relation::Le,
                    &chain.sup_g_mass,
                ));
                checks.push(Check::compare(
                    format!("P(U~) = P(U'~) at g({m})"),
                    &chain.sup_g_mass,
                    Relation::Eq,
                    &chain.g_sup_mass,
                ));
                checks.push(Check::compare(
                    format!("P(U'~) = P(M~) at m = {m}"),
                    &chain.g_sup_mass,
                    Relation::Eq,
                    &exceed,
                ));
                Some(chain)
            }
        };
        levels.push(DoobLevel {
            threshold: m,
            exceed_mass: exceed,
            bound,
            vacuous: expectation_infinite,
            chain,
        });
    }
    Ok(DoobReport {
        depth,
        expectation,
        expectation_infinite,
        levels,
        checks,
    })
}

/// `E(r_n) = Σ_{|x|=n, P(x)>0} P(x) r_n(x)`.
pub fn expectation(p: &Measure, proc: &RatioProcess, n: usize) -> Result<ExtendedRational> {
    require_depth(n, p.depth_cap())?;
    let mut acc = ExtendedRational::zero();
    for x in Bitstring::all_of_length(n) {
        let w = p.eval(&x)?;
        if !w.is_zero() {
            acc = acc.add(&proc.value(&x)?.weighted(&w));
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::bs;
    use crate::measure::TableMeasure;
    use crate::rational::{int, ratio};

    fn one() -> ExtendedRational {
        ExtendedRational::one()
    }

    fn zeros() -> Measure {
        Measure::bernoulli(ratio(0, 1)).unwrap()
    }

    #[test]
    fn likelihood_ratio_examples() {
        let u = Measure::uniform();
        let b = Measure::bernoulli(ratio(1, 3)).unwrap();
        assert_eq!(likelihood_ratio(&u, &u, &bs("0110")).unwrap(), one());
        assert_eq!(
            likelihood_ratio(&u, &b, &bs("11")).unwrap(),
            ExtendedRational::Finite(ratio(4, 9))
        );
        // P("0") = 0 under the point mass on ones
        let ones = Measure::bernoulli(ratio(1, 1)).unwrap();
        let half = Measure::uniform();
        assert_eq!(
            likelihood_ratio(&ones, &half, &bs("0")).unwrap(),
            ExtendedRational::Infinite
        );
        assert_eq!(
            likelihood_ratio(&ones, &zeros(), &bs("1")).unwrap(),
            ExtendedRational::zero()
        );
        assert_eq!(
            likelihood_ratio(&zeros(), &ones, &bs("1")).unwrap(),
            ExtendedRational::Infinite
        );
    }

    #[test]
    fn submartingale_examples() {
        let u = Measure::uniform();
        let r =
            check_submartingale(&u, &RatioProcess::likelihood(u.clone(), u.clone()), 6).unwrap();
        assert!(r.passed() && r.martingale);

        let b = Measure::bernoulli(ratio(1, 3)).unwrap();
        let r = check_submartingale(&u, &RatioProcess::likelihood(u.clone(), b), 6).unwrap();
        assert!(r.passed() && r.martingale);
        assert_eq!(r.nodes_checked, 63);

        let n = RatioProcess::from_fn(|x| ExtendedRational::Finite(int(x.len() as i64)));
        let r = check_submartingale(&u, &n, 4).unwrap();
        assert!(r.passed() && !r.martingale);
        assert_eq!(r.strict_nodes, 15);

        let down = RatioProcess::from_fn(|x| ExtendedRational::Finite(-int(x.len() as i64)));
        let r = check_submartingale(&u, &down, 3).unwrap();
        assert!(!r.passed());
        assert_eq!(r.violations.len(), 7);
    }

    #[test]
    fn null_nodes_are_skipped() {
        let u = Measure::uniform();
        let z = zeros();
        // Q/P with P the point mass on zeros; only the all-zero path has mass
        let r = check_submartingale(&z, &RatioProcess::likelihood(z.clone(), u), 4).unwrap();
        assert_eq!(r.nodes_checked, 4);
        assert_eq!(r.null_nodes_skipped, 11);
        // r(0^n) = 2^{-n} strictly decreases, so this is not a submartingale
        assert!(!r.passed());
    }

    #[test]
    fn doob_worked_example() {
        let u = Measure::uniform();
        let proc = RatioProcess::likelihood(u.clone(), zeros());
        let r = doob_check(&u, &proc, 2, &[2], None).unwrap();
        assert!(r.passed());
        assert_eq!(
            r.levels[0].exceed_mass,
            ExtendedRational::Finite(ratio(1, 4))
        );
        assert_eq!(r.levels[0].bound, ExtendedRational::Finite(ratio(1, 2)));
        assert_eq!(r.expectation, one());

        let same = RatioProcess::likelihood(u.clone(), u.clone());
        let r = doob_check(&u, &same, 7, &[1], None).unwrap();
        assert_eq!(r.levels[0].exceed_mass, ExtendedRational::zero());
        assert!(r.passed());
    }

    #[test]
    fn doob_flags_infinite_expectation() {
        let z = zeros();
        let proc = RatioProcess::likelihood(z.clone(), Measure::uniform());
        let ones = Measure::bernoulli(ratio(1, 1)).unwrap();
        // r = ∞ on every leaf off the zero path, but P there is zero; use a
        // P with mass on such a leaf instead
        let p =
            Measure::table(TableMeasure::from_leaves(1, vec![ratio(1, 2), ratio(1, 2)]).unwrap());
        let proc2 = RatioProcess::likelihood(ones, Measure::uniform());
        let r = doob_check(&p, &proc2, 2, &[1, 2], None).unwrap();
        assert!(r.expectation_infinite);
        assert!(r.levels.iter().all(|l| l.vacuous));
        assert!(r.passed());
        let r = doob_check(&z, &proc, 2, &[1], None).unwrap();
        assert!(!r.expectation_infinite);
    }

    #[test]
    fn doob_rejects_negative_values() {
        let u = Measure::uniform();
        let neg = RatioProcess::from_fn(|_| ExtendedRational::Finite(int(-1)));
        assert!(matches!(
            doob_check(&u, &neg, 2, &[1], None),
            Err(LabError::NegativeValue { .. })
        ));
        assert!(doob_check(&u, &neg, 2, &[0], None).is_err());
    }

    #[test]
    fn expectation_of_ratio_is_at_most_one() {
        let z = zeros();
        let u = Measure::uniform();
        for n in 0..6 {
            let e = expectation(&z, &RatioProcess::likelihood(z.clone(), u.clone()), n).unwrap();
            assert!(e <= one());
        }
    }
}
