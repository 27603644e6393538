//! Test families on `Ω` and `Ω²`: blind and Solovay tests, the decomposition
//! of a relativized test into global levels, and the expansion of a
//! conditional test into a joint one.

mod expansion;
mod lemma_a;

pub use expansion::{
    thmain_expand, thmain_probe, ExpansionInstance, ExpansionReport, PartialBound, ProbeReport,
    ProbeStep,
};
pub use lemma_a::{
    build_lemma_a_family, compute_f_epsilon, expand_via_lemma_a, verify_lemma_a, FEpsilon,
    LemmaAInstance, LemmaALevel, LemmaAReport, LemmaExpansionReport, SECTION_READING,
};

use std::fmt;
use std::sync::Arc;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::bits::Bitstring;
use crate::error::{LabError, Result};
use crate::measure::{prefix_set_measure, JointMeasure, Measure, PrefixSet, Rect, RectSet};
use crate::rational::{half_pow, serde_rational, ExtendedRational, Rational};
use crate::report::{Check, Relation, Verdict};

type BoundFn = Arc<dyn Fn(usize) -> Option<Rational> + Send + Sync>;

/// A decreasing bound `n ↦ f(n)` for level `n ≥ 1`.
#[derive(Clone)]
pub enum LevelBound {
    /// `2^{-n}`.
    Geometric,
    /// `values[n - 1]`.
    Explicit(Vec<Rational>),
    Func(BoundFn),
}

impl fmt::Debug for LevelBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Geometric => f.write_str("2^-n"),
            Self::Explicit(v) => write!(f, "Explicit({} values)", v.len()),
            Self::Func(_) => f.write_str("Func"),
        }
    }
}

impl LevelBound {
    pub fn at(&self, n: usize) -> Result<Rational> {
        let v = match self {
            Self::Geometric => Some(half_pow(n)),
            Self::Explicit(v) => n.checked_sub(1).and_then(|i| v.get(i)).cloned(),
            Self::Func(f) => f(n),
        };
        v.ok_or_else(|| LabError::Precondition(format!("bound undefined at level {n}")))
    }
}

/// Levels `U_1, U_2, ...` of open sets given by prefix sets.
#[derive(Clone, Debug)]
pub struct TestFamily {
    pub levels: Vec<PrefixSet>,
    pub bound: LevelBound,
}

impl TestFamily {
    pub fn new(levels: Vec<PrefixSet>) -> Self {
        Self {
            levels,
            bound: LevelBound::Geometric,
        }
    }

    pub fn with_bound(mut self, bound: LevelBound) -> Self {
        self.bound = bound;
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelMass {
    pub n: usize,
    #[serde(with = "serde_rational")]
    pub mass: Rational,
    #[serde(with = "serde_rational")]
    pub bound: Rational,
}

#[derive(Clone, Debug, Serialize)]
pub struct BlindReport {
    pub levels: Vec<LevelMass>,
    pub nested: bool,
    pub checks: Vec<Check>,
}

impl Verdict for BlindReport {
    fn checks(&self) -> &[Check] {
        &self.checks
    }
}

fn level_masses(m: &Measure, fam: &TestFamily, upto: usize) -> Result<Vec<LevelMass>> {
    (1..=upto)
        .map(|n| {
            Ok(LevelMass {
                n,
                mass: prefix_set_measure(m, &fam.levels[n - 1])?,
                bound: fam.bound.at(n)?,
            })
        })
        .collect()
}

/// Nesting `Ũ_{n+1} ⊆ Ũ_n` and `P(Ũ_n) < bound(n)` at every level.
pub fn verify_blind_test(m: &Measure, fam: &TestFamily) -> Result<BlindReport> {
    let levels = level_masses(m, fam, fam.levels.len())?;
    let mut checks = Vec::new();
    let mut nested = true;
    for n in 1..fam.levels.len() {
        let ok = fam.levels[n].is_subset_of(&fam.levels[n - 1]);
        nested &= ok;
        checks.push(Check::decided(
            format!("U_{} within U_{n}", n + 1),
            fam.levels[n].to_string(),
            Relation::Subset,
            fam.levels[n - 1].to_string(),
            ok,
        ));
    }
    for l in &levels {
        checks.push(Check::compare(
            format!("P(U_{}) < bound({})", l.n, l.n),
            &l.mass.clone().into(),
            Relation::Lt,
            &l.bound.clone().into(),
        ));
    }
    Ok(BlindReport {
        levels,
        nested,
        checks,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SolovayReport {
    pub horizon: usize,
    pub levels: Vec<LevelMass>,
    #[serde(with = "serde_rational")]
    pub partial_sum: Rational,
    #[serde(with = "serde_rational")]
    pub majorant_sum: Rational,
    pub majorant_respected: bool,
    pub checks: Vec<Check>,
}

impl Verdict for SolovayReport {
    fn checks(&self) -> &[Check] {
        &self.checks
    }
}

/// Partial sums `Σ_{n ≤ horizon} P(Ṽ_n)` against the family's bound used as
/// a convergent majorant, level by level.
pub fn verify_solovay(m: &Measure, fam: &TestFamily, horizon: usize) -> Result<SolovayReport> {
    if horizon > fam.levels.len() {
        return Err(LabError::Precondition(format!(
            "horizon {horizon} beyond the {} supplied levels",
            fam.levels.len()
        )));
    }
    let levels = level_masses(m, fam, horizon)?;
    let partial_sum = levels.iter().fold(Rational::zero(), |a, l| a + &l.mass);
    let majorant_sum = levels.iter().fold(Rational::zero(), |a, l| a + &l.bound);
    let mut checks = Vec::new();
    for l in &levels {
        checks.push(Check::compare(
            format!("P(V_{}) <= majorant({})", l.n, l.n),
            &l.mass.clone().into(),
            Relation::Le,
            &l.bound.clone().into(),
        ));
    }
    let majorant_respected = checks.iter().all(|c| c.pass);
    Ok(SolovayReport {
        horizon,
        levels,
        partial_sum,
        majorant_sum,
        majorant_respected,
        checks,
    })
}

/// A stage of a test relative to an oracle: `items` are enumerated once the
/// oracle prefix reaches `y`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage {
    pub y: Bitstring,
    pub items: PrefixSet,
}

/// A test relative to `y^∞`, as an explicit stage list. Anything enumerated
/// at `y` stays enumerated at every extension of `y`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelativizedTest {
    pub stages: Vec<Stage>,
}

impl RelativizedTest {
    pub fn new(stages: Vec<Stage>) -> Self {
        Self { stages }
    }

    /// Items visible to an oracle that has revealed `prefix`.
    pub fn enumerated_at(&self, prefix: &Bitstring) -> PrefixSet {
        self.stages
            .iter()
            .filter(|s| s.y.is_prefix_of(prefix))
            .flat_map(|s| s.items.iter().cloned())
            .collect()
    }

    /// The joint set `T = {(x, y) : x enumerated at stage y}` in stage order.
    pub fn rects(&self) -> RectSet {
        self.stages
            .iter()
            .flat_map(|s| {
                s.items
                    .iter()
                    .map(move |x| Rect::new(x.clone(), s.y.clone()))
            })
            .collect()
    }
}

/// `P(Ã | y)` for an open set given by a prefix set.
pub fn conditional_mass(j: &JointMeasure, a: &PrefixSet, y: &Bitstring) -> Result<Rational> {
    let mut sum = Rational::zero();
    for x in a.reduced().iter() {
        sum += j.conditional(x, y)?;
    }
    Ok(sum)
}

pub(crate) fn ext(r: &Rational) -> ExtendedRational {
    ExtendedRational::Finite(r.clone())
}
