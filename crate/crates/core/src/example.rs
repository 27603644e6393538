//! A computable joint measure whose conditionals encode a halting predicate.
//!
//! The `x`-space is cut into cells `Δ_n = Δ(1^{n-1}0)`, and each cell into a
//! marked half `Δ(1^{n-1}00)` and a balancing half `Δ(1^{n-1}01)`. Along any
//! `y`-branch, the first node `d` at which machine `n` is seen halted (halted
//! at `d`, not at its parent) multiplies the conditional mass of the marked
//! half by `1 - ε` on the `d0` side and `1 + ε` on the `d1` side; the
//! balancing half gets the opposite factor so `P(· | y)` stays a probability.
//! All other conditionals are inherited unchanged, so `P_X` and `P_Y` are both
//! uniform and `1 - ε ≤ P/Q ≤ 1 + ε` against the uniform product `Q`.

use std::collections::BTreeSet;

use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::bits::Bitstring;
use crate::error::{LabError, Result};
use crate::measure::{check_joint_consistency, JointMeasure, DEFAULT_DEPTH_CAP};
use crate::rational::{format_rational, half_pow, int, serde_rational, ExtendedRational, Rational};
use crate::report::{Check, Relation, Verdict};

/// Finite, extension-monotone halting predicate `halted(n, y)`, `n ≥ 1`.
///
/// Stored as the minimal halting prefixes of each machine, so two tables with
/// the same halted set compare equal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MachineTable {
    triggers: Vec<BTreeSet<Bitstring>>,
}

impl MachineTable {
    /// `machine_count` machines, none of which ever halts.
    pub fn empty(machine_count: usize) -> Self {
        Self {
            triggers: vec![BTreeSet::new(); machine_count],
        }
    }

    /// Machine `n` halts exactly on the extensions of its trigger prefixes,
    /// and is detected at `|trigger|`.
    pub fn from_triggers(
        machine_count: usize,
        triggers: impl IntoIterator<Item = (usize, Bitstring)>,
    ) -> Result<Self> {
        let mut t = Self::empty(machine_count);
        for (n, p) in triggers {
            t.add_trigger(n, p)?;
        }
        Ok(t)
    }

    /// Builds the monotone closure of explicit `(n, y, halted)` entries and
    /// rejects entries that contradict it.
    pub fn from_entries(
        machine_count: usize,
        entries: impl IntoIterator<Item = (usize, Bitstring, bool)>,
    ) -> Result<Self> {
        let entries: Vec<_> = entries.into_iter().collect();
        let mut t = Self::empty(machine_count);
        for (n, y, halted) in &entries {
            if *halted {
                t.add_trigger(*n, y.clone())?;
            }
        }
        for (n, y, halted) in &entries {
            if !*halted {
                t.check_index(*n)?;
                if let Some(trig) = t.detection_node(*n, y) {
                    return Err(LabError::NonMonotoneTable {
                        machine: *n,
                        halted: trig,
                        extension: y.clone(),
                    });
                }
            }
        }
        Ok(t)
    }

    fn check_index(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.triggers.len() {
            return Err(LabError::Precondition(format!(
                "machine index {n} outside 1..={}",
                self.triggers.len()
            )));
        }
        Ok(())
    }

    fn add_trigger(&mut self, n: usize, p: Bitstring) -> Result<()> {
        self.check_index(n)?;
        let set = &mut self.triggers[n - 1];
        if set.iter().any(|t| t.is_prefix_of(&p)) {
            return Ok(());
        }
        set.retain(|t| !p.is_prefix_of(t));
        set.insert(p);
        Ok(())
    }

    pub fn machine_count(&self) -> usize {
        self.triggers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triggers.iter().all(BTreeSet::is_empty)
    }

    /// Minimal halting prefixes of machine `n`.
    pub fn triggers(&self, n: usize) -> impl Iterator<Item = &Bitstring> {
        self.triggers[n - 1].iter()
    }

    /// `halted(n, y)`, i.e. `f(n, y, |y|) = 0`.
    pub fn halted(&self, n: usize, y: &Bitstring) -> bool {
        self.triggers
            .get(n.wrapping_sub(1))
            .is_some_and(|s| s.iter().any(|t| t.is_prefix_of(y)))
    }

    /// The unique node `d ⊑ y` with `halted(n, d)` and not `halted(n, parent(d))`.
    pub fn detection_node(&self, n: usize, y: &Bitstring) -> Option<Bitstring> {
        y.prefixes().find(|p| self.halted(n, p))
    }

    fn detects_at(&self, n: usize, d: &Bitstring) -> bool {
        self.halted(n, d) && d.parent().is_none_or(|p| !self.halted(n, &p))
    }
}

/// Inputs to [`build_example`].
#[derive(Clone, Debug)]
pub struct ExampleParams {
    pub epsilon: Rational,
    pub table: MachineTable,
    pub x_cap: usize,
    pub y_cap: usize,
}

impl ExampleParams {
    pub fn new(epsilon: Rational, table: MachineTable) -> Self {
        Self {
            epsilon,
            table,
            x_cap: DEFAULT_DEPTH_CAP,
            y_cap: DEFAULT_DEPTH_CAP,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Half {
    Marked,
    Balancing,
}

#[derive(Clone, Debug)]
pub struct ExampleMeasure {
    epsilon: Rational,
    table: MachineTable,
    x_cap: usize,
    y_cap: usize,
    /// Factors applied on the `d0` and `d1` side of a detection node.
    factors: (Rational, Rational),
}

/// `1^{n-1}0`.
pub fn cell_prefix(n: usize) -> Bitstring {
    Bitstring::repeat(true, n - 1).child(false)
}

/// `1^{n-1}00`, the half whose conditional mass carries machine `n`'s bit.
pub fn marked_half(n: usize) -> Bitstring {
    cell_prefix(n).child(false)
}

/// `1^{n-1}01`.
pub fn balancing_half(n: usize) -> Bitstring {
    cell_prefix(n).child(true)
}

/// Builds the joint measure; fails on `ε ∉ (0,1)`.
pub fn build_example(params: ExampleParams) -> Result<JointMeasure> {
    ExampleMeasure::new(params).map(JointMeasure::example)
}

impl ExampleMeasure {
    pub fn new(params: ExampleParams) -> Result<Self> {
        let ExampleParams {
            epsilon,
            table,
            x_cap,
            y_cap,
        } = params;
        if epsilon <= Rational::zero() || epsilon >= Rational::one() {
            return Err(LabError::EpsilonOutOfRange(format_rational(&epsilon)));
        }
        let factors = (Rational::one() - &epsilon, Rational::one() + &epsilon);
        Ok(Self {
            epsilon,
            table,
            x_cap,
            y_cap,
            factors,
        })
    }

    /// Replaces the detection factors. Anything other than `(1-ε, 1+ε)`
    /// breaks consistency; this exists to exercise the verifiers.
    pub fn with_child_factors(mut self, on_zero: Rational, on_one: Rational) -> Self {
        self.factors = (on_zero, on_one);
        self
    }

    pub fn epsilon(&self) -> &Rational {
        &self.epsilon
    }

    pub fn table(&self) -> &MachineTable {
        &self.table
    }

    pub fn depth_caps(&self) -> (usize, usize) {
        (self.x_cap, self.y_cap)
    }

    /// `P(Δ(marked half of n) | y) / 2^{-(n+1)}`, following the recursion
    /// along the prefixes of `y`.
    pub fn weight(&self, n: usize, y: &Bitstring) -> Rational {
        let mut w = Rational::one();
        for i in 0..y.len() {
            if self.table.detects_at(n, &y.prefix(i)) {
                w *= if y.bit(i) {
                    &self.factors.1
                } else {
                    &self.factors.0
                };
            }
        }
        w
    }

    /// `Some((n, half))` when `Δ(x)` lies inside a half of cell `n`.
    fn locate(x: &Bitstring) -> Option<(usize, Half)> {
        let ones = x.bits().iter().take_while(|&&b| b).count();
        if x.len() < ones + 2 {
            return None;
        }
        let half = if x.bit(ones + 1) {
            Half::Balancing
        } else {
            Half::Marked
        };
        Some((ones + 1, half))
    }

    /// `P(x | y) · 2^{|x|}`.
    fn factor(&self, x: &Bitstring, y: &Bitstring) -> Rational {
        match Self::locate(x) {
            Some((n, half)) if n <= self.table.machine_count() => {
                let w = self.weight(n, y);
                match half {
                    Half::Marked => w,
                    Half::Balancing => int(2) - w,
                }
            }
            _ => Rational::one(),
        }
    }

    pub fn eval(&self, x: &Bitstring, y: &Bitstring) -> Result<Rational> {
        if x.len() > self.x_cap {
            return Err(LabError::DepthExceeded {
                len: x.len(),
                cap: self.x_cap,
            });
        }
        if y.len() > self.y_cap {
            return Err(LabError::DepthExceeded {
                len: y.len(),
                cap: self.y_cap,
            });
        }
        Ok(self.factor(x, y) * half_pow(x.len() + y.len()))
    }

    /// `x ↦ P(x, y)` with the per-machine weights along `y` computed once.
    pub fn row(&self, y: &Bitstring, xs: &[Bitstring]) -> Result<Vec<Rational>> {
        if y.len() > self.y_cap {
            return Err(LabError::DepthExceeded {
                len: y.len(),
                cap: self.y_cap,
            });
        }
        let marked: Vec<Rational> = (1..=self.table.machine_count())
            .map(|n| self.weight(n, y))
            .collect();
        let longest = xs.iter().map(Bitstring::len).max().unwrap_or(0);
        // per length: unmarked value, then marked and balancing value per machine
        let by_len: Vec<(Rational, Vec<[Rational; 2]>)> = (0..=longest)
            .map(|k| {
                let s = half_pow(k + y.len());
                let halves = marked.iter().map(|w| [w * &s, (int(2) - w) * &s]).collect();
                (s, halves)
            })
            .collect();
        Ok(xs
            .iter()
            .map(|x| {
                let (plain, halves) = &by_len[x.len()];
                match Self::locate(x) {
                    Some((n, Half::Marked)) if n <= halves.len() => halves[n - 1][0].clone(),
                    Some((n, Half::Balancing)) if n <= halves.len() => halves[n - 1][1].clone(),
                    _ => plain.clone(),
                }
            })
            .collect())
    }

    /// Whether some detection lies strictly inside the `depth` window and
    /// touches a cell visible at that depth.
    pub fn detection_within(&self, depth: usize) -> bool {
        (1..=self.table.machine_count())
            .filter(|n| *n < depth)
            .any(|n| self.table.triggers(n).any(|t| t.len() < depth))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Located {
    pub x: Bitstring,
    pub y: Bitstring,
    #[serde(with = "serde_rational")]
    pub ratio: Rational,
}

#[derive(Clone, Debug, Serialize)]
pub struct RatioBoundsReport {
    pub depth: usize,
    #[serde(with = "serde_rational")]
    pub lower: Rational,
    #[serde(with = "serde_rational")]
    pub upper: Rational,
    pub min: Located,
    pub max: Located,
    pub violations: Vec<Located>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detection_within_cap: Option<bool>,
    pub checks: Vec<Check>,
}

impl Verdict for RatioBoundsReport {
    fn checks(&self) -> &[Check] {
        &self.checks
    }
}

/// Exhaustively checks `1 - ε ≤ P(x,y)/Q(x,y) ≤ 1 + ε` against the uniform
/// product `Q` for all `|x|, |y| ≤ depth`.
pub fn verify_ratio_bounds(
    p: &JointMeasure,
    epsilon: &Rational,
    depth: usize,
) -> Result<RatioBoundsReport> {
    let (cx, cy) = p.depth_caps();
    if depth > cx.min(cy) {
        return Err(LabError::DepthExceeded {
            len: depth,
            cap: cx.min(cy),
        });
    }
    let lower = Rational::one() - epsilon;
    let upper = Rational::one() + epsilon;
    let words: Vec<Bitstring> = Bitstring::all_up_to(depth).collect();
    let rows: Result<Vec<Vec<Located>>> = words
        .par_iter()
        .map(|x| {
            words
                .iter()
                .map(|y| {
                    let ratio = p.eval(x, y)? / half_pow(x.len() + y.len());
                    Ok(Located {
                        x: x.clone(),
                        y: y.clone(),
                        ratio,
                    })
                })
                .collect()
        })
        .collect();
    let all: Vec<Located> = rows?.into_iter().flatten().collect();
    let min = all
        .iter()
        .reduce(|a, b| if b.ratio < a.ratio { b } else { a })
        .cloned()
        .expect("at least the root");
    let max = all
        .iter()
        .reduce(|a, b| if b.ratio > a.ratio { b } else { a })
        .cloned()
        .expect("at least the root");
    let violations: Vec<Located> = all
        .into_iter()
        .filter(|l| l.ratio < lower || l.ratio > upper)
        .collect();

    let mut checks = vec![
        Check::compare(
            "min P/Q >= 1-eps",
            &min.ratio.clone().into(),
            Relation::Ge,
            &lower.clone().into(),
        ),
        Check::compare(
            "max P/Q <= 1+eps",
            &max.ratio.clone().into(),
            Relation::Le,
            &upper.clone().into(),
        ),
    ];
    let detection_within_cap = p.as_example().map(|e| e.detection_within(depth));
    if let Some(fires) = detection_within_cap {
        let attained = min.ratio == lower && max.ratio == upper;
        let flat = min.ratio.is_one() && max.ratio.is_one();
        checks.push(Check::decided(
            "extremes attained iff a detection fires within the cap",
            format!("attained={attained}"),
            Relation::Eq,
            format!("fires={fires}"),
            if fires { attained } else { flat },
        ));
    }
    Ok(RatioBoundsReport {
        depth,
        lower,
        upper,
        min,
        max,
        violations,
        detection_within_cap,
        checks,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DeviationReport {
    pub machine: usize,
    pub y: Bitstring,
    /// The cylinder whose conditional mass is traced.
    pub cell: Bitstring,
    #[serde(with = "serde_rational")]
    pub prior: Rational,
    pub deviates: bool,
    pub trace: Vec<ExtendedRational>,
    /// Whether machine `n`'s detection node is a proper prefix of `y`.
    pub trigger_fired: bool,
}

/// `deviates = [P(cell_n | y) ≠ P_X(cell_n)]` with the trace along the
/// prefixes of `y`, where `cell_n` is the marked half of cell `n`.
pub fn conditional_deviation(p: &JointMeasure, n: usize, y: &Bitstring) -> Result<DeviationReport> {
    let e = p
        .as_example()
        .ok_or_else(|| LabError::Precondition("measure is not an example construction".into()))?;
    if n == 0 || n > e.table.machine_count() {
        return Err(LabError::Precondition(format!(
            "machine index {n} outside 1..={}",
            e.table.machine_count()
        )));
    }
    let cell = marked_half(n);
    let trace = p.conditional_trace(&cell, y)?;
    let prior = half_pow(n + 1);
    let deviates = trace.last().is_some_and(|v| *v != prior);
    let trigger_fired = e
        .table
        .detection_node(n, y)
        .is_some_and(|d| d.len() < y.len());
    Ok(DeviationReport {
        machine: n,
        y: y.clone(),
        cell,
        prior,
        deviates,
        trace: trace.into_iter().map(ExtendedRational::Finite).collect(),
        trigger_fired,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct InvariantReport {
    pub depth: usize,
    pub additivity_violations: usize,
    pub first_additivity_violation: Option<crate::measure::Violation>,
    pub marginal_mismatches: Vec<String>,
    pub proportionality_mismatches: usize,
    pub multiple_factor_branches: Vec<String>,
    pub checks: Vec<Check>,
}

impl Verdict for InvariantReport {
    fn checks(&self) -> &[Check] {
        &self.checks
    }
}

/// Exact checks of (i) additivity, (ii) uniform marginals, (iii) within-half
/// proportionality, (iv) at most one factor per cell and branch.
pub fn verify_example_invariants(p: &JointMeasure, depth: usize) -> Result<InvariantReport> {
    let e = p
        .as_example()
        .ok_or_else(|| LabError::Precondition("measure is not an example construction".into()))?;
    let consistency = check_joint_consistency(p, depth)?;

    let empty = Bitstring::empty();
    let mut marginal_mismatches = Vec::new();
    for w in Bitstring::all_up_to(depth) {
        let expect = half_pow(w.len());
        let px = p.eval(&w, &empty)?;
        if px != expect {
            marginal_mismatches.push(format!("P_X(\"{w}\") = {}", format_rational(&px)));
        }
        let py = p.eval(&empty, &w)?;
        if py != expect {
            marginal_mismatches.push(format!("P_Y(\"{w}\") = {}", format_rational(&py)));
        }
    }

    let words: Vec<Bitstring> = Bitstring::all_up_to(depth).collect();
    let proportionality_mismatches: usize = words
        .par_iter()
        .map(|y| -> Result<usize> {
            if p.marginal_y(y)?.is_zero() {
                return Ok(0);
            }
            let mut bad = 0;
            for x in &words {
                if let Some((n, half)) = ExampleMeasure::locate(x) {
                    let h = if half == Half::Marked {
                        marked_half(n)
                    } else {
                        balancing_half(n)
                    };
                    let lhs = p.conditional(x, y)?;
                    let rhs = half_pow(x.len() - h.len()) * p.conditional(&h, y)?;
                    if lhs != rhs {
                        bad += 1;
                    }
                }
            }
            Ok(bad)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();

    let mut multiple_factor_branches = Vec::new();
    for n in (1..=e.table.machine_count()).filter(|n| *n < depth) {
        let cell = marked_half(n);
        for branch in Bitstring::all_of_length(depth) {
            let trace = p.conditional_trace(&cell, &branch)?;
            let changes = trace.windows(2).filter(|w| w[0] != w[1]).count();
            if changes > 1 {
                multiple_factor_branches.push(format!("machine {n} along \"{branch}\""));
            }
        }
    }

    let count =
        |name: &str, k: usize| Check::decided(name, k.to_string(), Relation::Eq, "0", k == 0);
    let checks = vec![
        count("additivity violations", consistency.violations.len()),
        count("marginal mismatches", marginal_mismatches.len()),
        count(
            "within-half proportionality mismatches",
            proportionality_mismatches,
        ),
        count(
            "branches with more than one factor",
            multiple_factor_branches.len(),
        ),
    ];
    Ok(InvariantReport {
        depth,
        additivity_violations: consistency.violations.len(),
        first_additivity_violation: consistency.violations.first().cloned(),
        marginal_mismatches,
        proportionality_mismatches,
        multiple_factor_branches,
        checks,
    })
}
