//! Finite-depth diagnostics comparing two measures through `Q/P`.

use std::fmt;
use std::sync::Arc;

use num_traits::Zero;
use rayon::prelude::*;
use serde::Serialize;

use super::likelihood_ratio;
use crate::bits::Bitstring;
use crate::error::{LabError, Result};
use crate::measure::{JointMeasure, Measure};
use crate::rational::{serde_rational, ExtendedRational, Rational};
use crate::report::{Check, Relation, Verdict};

type HFn = Arc<dyn Fn(u64) -> Option<Rational> + Send + Sync>;

/// A decreasing `h : ℕ → ℚ` meant to bound `P(P/Q > k)`.
#[derive(Clone)]
pub struct ProbBoundCertificate {
    h: HFn,
    label: String,
}

impl fmt::Debug for ProbBoundCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ProbBoundCertificate({})", self.label)
    }
}

impl ProbBoundCertificate {
    pub fn new(
        label: impl Into<String>,
        h: impl Fn(u64) -> Option<Rational> + Send + Sync + 'static,
    ) -> Self {
        Self {
            h: Arc::new(h),
            label: label.into(),
        }
    }

    /// `h(k) = 1/k`.
    pub fn reciprocal() -> Self {
        Self::new("1/k", |k| {
            (k > 0).then(|| Rational::new(1.into(), k.into()))
        })
    }

    pub fn from_table(table: Vec<(u64, Rational)>) -> Self {
        let map: std::collections::BTreeMap<u64, Rational> = table.into_iter().collect();
        Self::new("table", move |k| map.get(&k).cloned())
    }

    pub fn h(&self, k: u64) -> Result<Rational> {
        (self.h)(k).ok_or_else(|| LabError::Precondition(format!("h undefined at {k}")))
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundLevel {
    pub k: u64,
    /// `P({x : |x| = depth, P(x)/Q(x) > k})`.
    #[serde(with = "serde_rational")]
    pub mass: Rational,
    #[serde(with = "serde_rational")]
    pub h: Rational,
    #[serde(with = "serde_rational")]
    pub margin: Rational,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundedProbReport {
    pub depth: usize,
    pub certificate: String,
    pub levels: Vec<BoundLevel>,
    pub checks: Vec<Check>,
}

impl Verdict for BoundedProbReport {
    fn checks(&self) -> &[Check] {
        &self.checks
    }
}

/// For each `k`, the exact mass of `{P/Q > k}` among depth-`depth`
/// cylinders, compared to `h(k)`. Also checks `h` is non-increasing on `ks`.
pub fn check_bounded_in_probability(
    p: &Measure,
    q: &Measure,
    cert: &ProbBoundCertificate,
    depth: usize,
    ks: &[u64],
) -> Result<BoundedProbReport> {
    let cap = p.depth_cap().min(q.depth_cap());
    if depth > cap {
        return Err(LabError::DepthExceeded { len: depth, cap });
    }
    let leaves: Vec<Bitstring> = Bitstring::all_of_length(depth).collect();
    let rows: Vec<(Rational, ExtendedRational)> = leaves
        .par_iter()
        .map(|x| Ok((p.eval(x)?, likelihood_ratio(q, p, x)?)))
        .collect::<Result<_>>()?;

    let mut levels = Vec::new();
    let mut checks = Vec::new();
    for &k in ks {
        let kk = ExtendedRational::Finite(Rational::from_integer(k.into()));
        let mass = rows
            .iter()
            .filter(|(_, r)| *r > kk)
            .fold(Rational::zero(), |a, (w, _)| a + w);
        let h = cert.h(k)?;
        checks.push(Check::compare(
            format!("P(P/Q > {k}) < h({k}) at depth {depth}"),
            &mass.clone().into(),
            Relation::Lt,
            &h.clone().into(),
        ));
        levels.push(BoundLevel {
            k,
            margin: &h - &mass,
            mass,
            h,
        });
    }
    let mut sorted = levels.clone();
    sorted.sort_by_key(|l| l.k);
    let monotone = sorted.windows(2).all(|w| w[0].h >= w[1].h);
    checks.push(Check::decided(
        "h non-increasing on the evaluated k",
        "h",
        Relation::Holds,
        "decreasing",
        monotone,
    ));
    Ok(BoundedProbReport {
        depth,
        certificate: cert.label.clone(),
        levels,
        checks,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Running minimum still at or above the threshold.
    Bounded,
    /// Running minimum dropped below the threshold.
    Decayed,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassificationReport {
    pub x: Bitstring,
    #[serde(with = "serde_rational")]
    pub threshold: Rational,
    /// `Q(x[..i]) / P(x[..i])` for `i = 0..=|x|`.
    pub ratios: Vec<ExtendedRational>,
    pub running_min: Vec<ExtendedRational>,
    pub running_max: Vec<ExtendedRational>,
    pub regime: Regime,
    pub checks: Vec<Check>,
}

impl Verdict for ClassificationReport {
    fn checks(&self) -> &[Check] {
        &self.checks
    }
}

/// Running ratio along the prefixes of `x`. The regime is a statement about
/// this finite prefix only.
pub fn classify(
    p: &Measure,
    q: &Measure,
    x: &Bitstring,
    threshold: &Rational,
) -> Result<ClassificationReport> {
    let ratios = x
        .prefixes()
        .map(|w| likelihood_ratio(p, q, &w))
        .collect::<Result<Vec<_>>>()?;
    let scan = |pick: fn(ExtendedRational, ExtendedRational) -> ExtendedRational| {
        let mut out: Vec<ExtendedRational> = Vec::with_capacity(ratios.len());
        for r in &ratios {
            let next = match out.last() {
                Some(prev) => pick(prev.clone(), r.clone()),
                None => r.clone(),
            };
            out.push(next);
        }
        out
    };
    let running_min = scan(std::cmp::min);
    let running_max = scan(std::cmp::max);
    let last_min = running_min
        .last()
        .cloned()
        .unwrap_or_else(ExtendedRational::one);
    let regime = if last_min < ExtendedRational::Finite(threshold.clone()) {
        Regime::Decayed
    } else {
        Regime::Bounded
    };
    let monotone = running_min.windows(2).all(|w| w[1] <= w[0])
        && running_max.windows(2).all(|w| w[1] >= w[0]);
    let checks = vec![Check::decided(
        "running min non-increasing and running max non-decreasing",
        "running extremes",
        Relation::Holds,
        "monotone",
        monotone,
    )];
    Ok(ClassificationReport {
        x: x.clone(),
        threshold: threshold.clone(),
        ratios,
        running_min,
        running_max,
        regime,
        checks,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RatioAt {
    pub x: Bitstring,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<Bitstring>,
    pub ratio: ExtendedRational,
}

#[derive(Clone, Debug, Serialize)]
pub struct EquivalenceReport {
    pub depth: usize,
    #[serde(with = "serde_rational")]
    pub c: Rational,
    #[serde(with = "serde_rational")]
    pub c_hi: Rational,
    pub strict: bool,
    pub min: RatioAt,
    pub max: RatioAt,
    pub violation_count: usize,
    pub first_violation: Option<RatioAt>,
    pub checks: Vec<Check>,
}

impl Verdict for EquivalenceReport {
    fn checks(&self) -> &[Check] {
        &self.checks
    }
}

fn certify(
    samples: Vec<RatioAt>,
    c: &Rational,
    c_hi: &Rational,
    depth: usize,
    strict: bool,
) -> EquivalenceReport {
    let lo = ExtendedRational::Finite(c.clone());
    let hi = ExtendedRational::Finite(c_hi.clone());
    let (rel_lo, rel_hi) = if strict {
        (Relation::Lt, Relation::Lt)
    } else {
        (Relation::Le, Relation::Le)
    };
    let ok = |s: &RatioAt| rel_lo.eval(&lo, &s.ratio) && rel_hi.eval(&s.ratio, &hi);
    let violation_count = samples.iter().filter(|s| !ok(s)).count();
    let first_violation = samples.iter().find(|s| !ok(s)).cloned();
    let min = samples
        .iter()
        .reduce(|a, b| if b.ratio < a.ratio { b } else { a })
        .cloned()
        .expect("root sample");
    let max = samples
        .iter()
        .reduce(|a, b| if b.ratio > a.ratio { b } else { a })
        .cloned()
        .expect("root sample");
    let checks = vec![
        Check::compare("c vs min Q/P", &lo, rel_lo, &min.ratio),
        Check::compare("max Q/P vs c_hi", &max.ratio, rel_hi, &hi),
    ];
    EquivalenceReport {
        depth,
        c: c.clone(),
        c_hi: c_hi.clone(),
        strict,
        min,
        max,
        violation_count,
        first_violation,
        checks,
    }
}

fn require_bounds(c: &Rational, c_hi: &Rational) -> Result<()> {
    if *c <= Rational::zero() || c > c_hi {
        return Err(LabError::Precondition(
            "equivalence bounds need 0 < c <= c_hi".into(),
        ));
    }
    Ok(())
}

/// `c ⋈ Q(x)/P(x) ⋈ c_hi` for every `|x| ≤ depth`.
pub fn equivalence_certificate(
    p: &Measure,
    q: &Measure,
    c: &Rational,
    c_hi: &Rational,
    depth: usize,
    strict: bool,
) -> Result<EquivalenceReport> {
    require_bounds(c, c_hi)?;
    let cap = p.depth_cap().min(q.depth_cap());
    if depth > cap {
        return Err(LabError::DepthExceeded { len: depth, cap });
    }
    let samples = Bitstring::all_up_to(depth)
        .map(|x| {
            Ok(RatioAt {
                ratio: likelihood_ratio(p, q, &x)?,
                x,
                y: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(certify(samples, c, c_hi, depth, strict))
}

/// Same on the product tree: every `|x|, |y| ≤ depth`.
pub fn joint_equivalence_certificate(
    p: &JointMeasure,
    q: &JointMeasure,
    c: &Rational,
    c_hi: &Rational,
    depth: usize,
    strict: bool,
) -> Result<EquivalenceReport> {
    require_bounds(c, c_hi)?;
    let words: Vec<Bitstring> = Bitstring::all_up_to(depth).collect();
    let samples: Vec<RatioAt> = words
        .par_iter()
        .map(|x| {
            words
                .iter()
                .map(|y| {
                    Ok(RatioAt {
                        x: x.clone(),
                        y: Some(y.clone()),
                        ratio: ExtendedRational::ratio(&q.eval(x, y)?, &p.eval(x, y)?),
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    Ok(certify(samples, c, c_hi, depth, strict))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::bs;
    use crate::example::{build_example, ExampleParams, MachineTable};
    use crate::rational::{int, ratio};

    fn b13() -> Measure {
        Measure::bernoulli(ratio(1, 3)).unwrap()
    }

    fn pow(r: Rational, k: usize) -> Rational {
        num_traits::pow(r, k)
    }

    #[test]
    fn bounded_in_probability_examples() {
        let u = Measure::uniform();
        let r = check_bounded_in_probability(
            &u,
            &u,
            &ProbBoundCertificate::reciprocal(),
            5,
            &[1, 2, 4],
        )
        .unwrap();
        assert!(r.passed());
        assert!(r.levels.iter().all(|l| l.mass.is_zero()));

        let z = Measure::bernoulli(ratio(0, 1)).unwrap();
        let r = check_bounded_in_probability(&u, &z, &ProbBoundCertificate::reciprocal(), 2, &[2])
            .unwrap();
        assert_eq!(r.levels[0].mass, ratio(3, 4));
        assert!(!r.passed());

        let r = check_bounded_in_probability(
            &u,
            &b13(),
            &ProbBoundCertificate::reciprocal(),
            6,
            &[2, 4, 8],
        )
        .unwrap();
        // brute force: P/Q = 2^-6 / ((1/3)^k (2/3)^(6-k)) with k ones
        for l in &r.levels {
            let mut expect = Rational::zero();
            for x in Bitstring::all_of_length(6) {
                let ones = x.bits().iter().filter(|&&b| b).count();
                let q = pow(ratio(1, 3), ones) * pow(ratio(2, 3), 6 - ones);
                if ratio(1, 64) / q > int(l.k as i64) {
                    expect += ratio(1, 64);
                }
            }
            assert_eq!(l.mass, expect);
        }
        let masses: Vec<_> = r.levels.iter().map(|l| l.mass.clone()).collect();
        assert_eq!(masses, [ratio(11, 32), ratio(7, 64), ratio(1, 64)]);
    }

    #[test]
    fn classification_examples() {
        let u = Measure::uniform();
        let r = classify(&u, &u, &bs("0110"), &ratio(1, 2)).unwrap();
        assert!(r.ratios.iter().all(|v| *v == ExtendedRational::one()));
        assert_eq!(r.regime, Regime::Bounded);

        let r = classify(&u, &b13(), &bs("010101"), &ratio(1, 2)).unwrap();
        for k in 0..=3 {
            assert_eq!(
                r.running_min[2 * k],
                ExtendedRational::Finite(pow(ratio(8, 9), k))
            );
        }
        assert!(r.passed());

        let r = classify(&u, &b13(), &Bitstring::repeat(false, 6), &ratio(1, 2)).unwrap();
        assert_eq!(r.ratios[6], ExtendedRational::Finite(pow(ratio(4, 3), 6)));
        assert_eq!(r.running_min[6], ExtendedRational::one());
        assert_eq!(r.regime, Regime::Bounded);

        let r = classify(&u, &b13(), &Bitstring::repeat(true, 6), &ratio(1, 2)).unwrap();
        assert_eq!(r.regime, Regime::Decayed);
    }

    #[test]
    fn equivalence_examples() {
        let u = Measure::uniform();
        let e = build_example(ExampleParams::new(
            ratio(1, 2),
            MachineTable::from_triggers(1, [(1, bs("1"))]).unwrap(),
        ))
        .unwrap();
        let (ex, _) = e.marginals();
        assert!(
            equivalence_certificate(&ex, &u, &ratio(1, 2), &int(2), 6, true)
                .unwrap()
                .passed()
        );

        let r = joint_equivalence_certificate(
            &JointMeasure::uniform_product(),
            &e,
            &ratio(1, 3),
            &int(3),
            4,
            false,
        )
        .unwrap();
        assert!(r.passed());
        assert_eq!(r.min.ratio, ExtendedRational::Finite(ratio(1, 2)));
        assert_eq!(r.max.ratio, ExtendedRational::Finite(ratio(3, 2)));

        let r = equivalence_certificate(&u, &b13(), &ratio(1, 2), &int(2), 4, false).unwrap();
        assert!(!r.passed());
        assert_eq!(r.max.x, bs("0000"));
        assert_eq!(r.max.ratio, ExtendedRational::Finite(ratio(256, 81)));
        assert!(equivalence_certificate(&u, &u, &int(2), &int(1), 2, false).is_err());
    }
}
