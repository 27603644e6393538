//! Decomposing a test relative to an oracle into global levels `U_n`.
//!
//! Given a non-overlapping enumeration `W = (x¹,y¹), (x²,y²), ...`, level `n`
//! keeps the rectangles of `W_n` above those oracle cylinders `y` on which
//! the conditional mass of the section `W_{n,y}` is still below `ε`.
//! Sections only grow with `n`, so each point enters and leaves the levels at
//! most once; that is what makes the differences `Ũ_n ∖ Ũ_{n+1}` disjoint.
//!
//! Oracle cylinders are taken at a fixed depth `D ≥ max |yⁱ|`. Each such
//! cylinder lies inside one atom of every partition `V_n` generated by the
//! `Δ(yⁱ)`, and the section is constant on an atom.

use std::collections::BTreeMap;

use num_traits::Zero;
use serde::Serialize;

use super::{conditional_mass, ext, RelativizedTest};
use crate::bits::Bitstring;
use crate::error::{LabError, Result};
use crate::measure::grid::LeafGrid;
use crate::measure::{nonoverlapping_cover, JointMeasure, PrefixSet, Rect, RectSet};
use crate::rational::{format_rational, serde_rational, Rational};
use crate::report::{Check, Relation, Verdict};

/// How the membership condition binds `x`: the pair's `x` ranges over the
/// section and the sum runs over the whole section.
pub const SECTION_READING: &str =
    "U_n = {(x,y) : x in W_{n,y}, y in V_n, sum over x' in W_{n,y} of P(x'|y) < eps}";

#[derive(Clone, Debug, Serialize)]
pub struct LemmaALevel {
    pub n: usize,
    /// Atoms of the partition generated by `Δ(y¹), ..., Δ(yⁿ)`.
    pub atoms: Vec<PrefixSet>,
    pub u: RectSet,
}

#[derive(Clone, Debug, Serialize)]
pub struct LemmaAInstance {
    pub w: RectSet,
    #[serde(with = "serde_rational")]
    pub epsilon: Rational,
    pub y_depth: usize,
    pub levels: Vec<LemmaALevel>,
    #[serde(skip)]
    joint: JointMeasure,
}

impl LemmaAInstance {
    pub fn joint(&self) -> &JointMeasure {
        &self.joint
    }

    /// `Ũ_n` for `n ≥ 1`, stabilised at the last index.
    pub fn level(&self, n: usize) -> RectSet {
        match self.levels.len() {
            0 => RectSet::empty(),
            len => self.levels[n.clamp(1, len) - 1].u.clone(),
        }
    }

    /// `liminf_n Ũ_n`, which for a finite family is the last level.
    pub fn liminf(&self) -> RectSet {
        self.level(self.levels.len())
    }

    /// `W_{n,y} = {x : (x,z) ∈ W_n, z ⊑ y}`.
    pub fn section(&self, n: usize, y: &Bitstring) -> PrefixSet {
        section(&self.w, n, y)
    }

    fn grid_dims(&self) -> (usize, usize) {
        (self.w.max_lens().0, self.y_depth)
    }

    fn grid(&self, rects: &RectSet, dims: (usize, usize)) -> Result<LeafGrid> {
        LeafGrid::from_rects(rects, dims.0, dims.1)
    }
}

fn section(w: &RectSet, n: usize, y: &Bitstring) -> PrefixSet {
    w.iter()
        .take(n)
        .filter(|r| r.y.is_prefix_of(y))
        .map(|r| r.x.clone())
        .collect()
}

/// Builds `U_1, ..., U_{|W|}`. `y_depth` defaults to the longest `yⁱ`.
pub fn build_lemma_a_family(
    w: RectSet,
    epsilon: Rational,
    joint: JointMeasure,
    y_depth: Option<usize>,
) -> Result<LemmaAInstance> {
    if !w.is_pairwise_disjoint() {
        return Err(LabError::Precondition(
            "W overlaps; take its non-overlapping cover first".into(),
        ));
    }
    if epsilon <= Rational::zero() {
        return Err(LabError::Precondition(format!(
            "epsilon {} must be positive",
            format_rational(&epsilon)
        )));
    }
    let longest = w.max_lens().1;
    let d = y_depth.unwrap_or(longest);
    if d < longest {
        return Err(LabError::Precondition(format!(
            "oracle depth {d} is shorter than an enumerated y of length {longest}"
        )));
    }
    let ys: Vec<Bitstring> = Bitstring::all_of_length(d).collect();
    let mut levels = Vec::with_capacity(w.len());
    for n in 1..=w.len() {
        let mut by_signature: BTreeMap<Vec<bool>, Vec<Bitstring>> = BTreeMap::new();
        let mut u = Vec::new();
        for y in &ys {
            let sig = w.iter().take(n).map(|r| r.y.is_prefix_of(y)).collect();
            by_signature.entry(sig).or_default().push(y.clone());
            let sec = section(&w, n, y);
            if sec.is_empty() {
                continue;
            }
            if joint.marginal_y(y)?.is_zero() {
                return Err(LabError::NullAtom { y: y.clone() });
            }
            if conditional_mass(&joint, &sec, y)? < epsilon {
                u.extend(sec.iter().map(|x| Rect::new(x.clone(), y.clone())));
            }
        }
        levels.push(LemmaALevel {
            n,
            atoms: by_signature
                .into_values()
                .map(|ys| PrefixSet::new(ys).canonical())
                .collect(),
            u: RectSet::new(u).canonical(),
        });
    }
    Ok(LemmaAInstance {
        w,
        epsilon,
        y_depth: d,
        levels,
        joint,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LemmaAReport {
    pub reading: &'static str,
    pub depth: usize,
    pub y_prefix: Bitstring,
    pub levels: usize,
    #[serde(with = "crate::rational::serde_rational_vec")]
    pub level_masses: Vec<Rational>,
    #[serde(with = "crate::rational::serde_rational_vec")]
    pub difference_masses: Vec<Rational>,
    #[serde(with = "serde_rational")]
    pub liminf_mass: Rational,
    /// `Ã`: everything enumerated once the oracle shows `y_prefix`.
    pub enumerated: PrefixSet,
    #[serde(with = "serde_rational")]
    pub enumerated_conditional_mass: Rational,
    pub liminf_section: PrefixSet,
    pub checks: Vec<Check>,
}

impl Verdict for LemmaAReport {
    fn checks(&self) -> &[Check] {
        &self.checks
    }
}

fn differences(grids: &[LeafGrid]) -> Vec<LeafGrid> {
    (0..grids.len())
        .map(|i| match grids.get(i + 1) {
            Some(next) => grids[i].difference(next),
            None => grids[i].difference(&grids[i]),
        })
        .collect()
}

/// Exhaustive check of the decomposition identities at leaf depth `depth`
/// plus the section identity at `y_prefix`.
pub fn verify_lemma_a(
    inst: &LemmaAInstance,
    y_prefix: &Bitstring,
    depth: usize,
) -> Result<LemmaAReport> {
    let (wx, _) = inst.w.max_lens();
    let need = wx.max(inst.y_depth);
    if depth < need {
        return Err(LabError::Precondition(format!(
            "leaf depth {depth} is coarser than the family (needs {need})"
        )));
    }
    if y_prefix.len() < inst.y_depth {
        return Err(LabError::Precondition(format!(
            "oracle prefix \"{y_prefix}\" is shorter than the family's oracle depth {}",
            inst.y_depth
        )));
    }
    let dims = (depth, depth);
    let n = inst.levels.len();
    let grids = (1..=n)
        .map(|k| inst.grid(&inst.level(k), dims))
        .collect::<Result<Vec<_>>>()?;
    let empty = LeafGrid::new(depth, depth)?;
    let liminf = grids.last().cloned().unwrap_or_else(|| empty.clone());
    let diffs = differences(&grids);
    let joint = inst.joint();

    let mut checks = Vec::new();
    let mut overlapping = Vec::new();
    for a in 0..diffs.len() {
        for b in a + 1..diffs.len() {
            if !diffs[a].intersection(&diffs[b]).is_empty() {
                overlapping.push(format!("({},{})", a + 1, b + 1));
            }
        }
    }
    checks.push(Check::decided(
        "differences pairwise disjoint",
        format!("{} overlapping pairs", overlapping.len()),
        Relation::Disjoint,
        overlapping.join(" "),
        overlapping.is_empty(),
    ));

    let meeting: Vec<usize> = (0..diffs.len())
        .filter(|&k| !diffs[k].intersection(&liminf).is_empty())
        .map(|k| k + 1)
        .collect();
    checks.push(Check::decided(
        "differences disjoint from liminf",
        format!("{} differences meet liminf", meeting.len()),
        Relation::Disjoint,
        "liminf",
        meeting.is_empty(),
    ));

    let union_levels = grids.iter().fold(empty.clone(), |a, g| a.union(g));
    let union_pieces = diffs.iter().fold(liminf.clone(), |a, g| a.union(g));
    let all_u: RectSet = inst
        .levels
        .iter()
        .flat_map(|l| l.u.iter().cloned())
        .collect();
    let union_rects = inst.grid(&all_u, dims)?;
    checks.push(Check::decided(
        "union of levels = union of differences and liminf",
        format!("{} leaves", union_levels.count()),
        Relation::Eq,
        format!("{} leaves", union_pieces.count()),
        union_levels == union_pieces && union_rects == union_levels,
    ));

    let enumerated = inst.section(inst.w.len(), y_prefix).reduced();
    let y_at_depth = y_prefix.prefix(inst.y_depth);
    let premise = if enumerated.is_empty() {
        Rational::zero()
    } else {
        conditional_mass(joint, &enumerated, &y_at_depth)?
    };
    let liminf_section: PrefixSet = inst
        .liminf()
        .iter()
        .filter(|r| r.y.is_prefix_of(y_prefix))
        .map(|r| r.x.clone())
        .collect::<PrefixSet>()
        .reduced();
    let same = liminf_section.is_subset_of(&enumerated) && enumerated.is_subset_of(&liminf_section);
    let section_check = if premise < inst.epsilon {
        Check::decided(
            format!("liminf section at \"{y_prefix}\" = enumerated set"),
            liminf_section.to_string(),
            Relation::Eq,
            enumerated.to_string(),
            same,
        )
    } else {
        Check::decided(
            format!("liminf section at \"{y_prefix}\" = enumerated set"),
            liminf_section.to_string(),
            Relation::Eq,
            enumerated.to_string(),
            true,
        )
        .with_note(format!(
            "vacuous: conditional mass {} is not below epsilon {}",
            format_rational(&premise),
            format_rational(&inst.epsilon)
        ))
    };
    checks.push(section_check);

    let mut shrinking = 0usize;
    for k in 1..n {
        for y in Bitstring::all_of_length(inst.y_depth) {
            if !inst.section(k, &y).is_subset_of(&inst.section(k + 1, &y)) {
                shrinking += 1;
            }
        }
    }
    checks.push(Check::decided(
        "sections grow with n",
        shrinking.to_string(),
        Relation::Eq,
        "0",
        shrinking == 0,
    ));

    Ok(LemmaAReport {
        reading: SECTION_READING,
        depth,
        y_prefix: y_prefix.clone(),
        levels: n,
        level_masses: grids
            .iter()
            .map(|g| g.measure(joint))
            .collect::<Result<_>>()?,
        difference_masses: diffs
            .iter()
            .map(|g| g.measure(joint))
            .collect::<Result<_>>()?,
        liminf_mass: liminf.measure(joint)?,
        enumerated,
        enumerated_conditional_mass: premise,
        liminf_section,
        checks,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FEpsilon {
    pub index: usize,
    #[serde(with = "serde_rational")]
    pub query: Rational,
    /// `P(∪_{k≤n} Ũ_n ∖ Ũ_{n+1})` for `k = 1, 2, ...`.
    #[serde(with = "crate::rational::serde_rational_vec")]
    pub tail_masses: Vec<Rational>,
}

fn tails(inst: &LemmaAInstance) -> Result<Vec<LeafGrid>> {
    let dims = inst.grid_dims();
    let grids = (1..=inst.levels.len())
        .map(|k| inst.grid(&inst.level(k), dims))
        .collect::<Result<Vec<_>>>()?;
    let diffs = differences(&grids);
    let mut acc = LeafGrid::new(dims.0, dims.1)?;
    let mut out = vec![acc.clone()];
    for d in diffs.iter().rev() {
        acc = acc.union(d);
        out.push(acc.clone());
    }
    out.reverse();
    Ok(out)
}

/// Least `k ≥ 1` with `P(∪_{n ≥ k} Ũ_n ∖ Ũ_{n+1}) < eps`.
pub fn compute_f_epsilon(inst: &LemmaAInstance, eps: &Rational) -> Result<FEpsilon> {
    if *eps <= Rational::zero() {
        return Err(LabError::NoValidIndex(format_rational(eps)));
    }
    let tail_masses = tails(inst)?
        .iter()
        .map(|g| g.measure(inst.joint()))
        .collect::<Result<Vec<_>>>()?;
    let index = tail_masses
        .iter()
        .position(|m| m < eps)
        .map(|i| i + 1)
        .ok_or_else(|| LabError::NoValidIndex(format_rational(eps)))?;
    Ok(FEpsilon {
        index,
        query: eps.clone(),
        tail_masses,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LemmaExpansionReport {
    pub reading: &'static str,
    pub y_prefix: Bitstring,
    #[serde(with = "serde_rational")]
    pub epsilon: Rational,
    #[serde(with = "serde_rational")]
    pub conditional_mass: Rational,
    pub f_epsilon: usize,
    pub family: LemmaAInstance,
    /// The global test: `∪_{n ≥ f(ε)} U_n`.
    pub witness: RectSet,
    #[serde(with = "serde_rational")]
    pub tail_mass: Rational,
    #[serde(with = "serde_rational")]
    pub liminf_mass: Rational,
    #[serde(with = "serde_rational")]
    pub global_mass: Rational,
    pub checks: Vec<Check>,
}

impl Verdict for LemmaExpansionReport {
    fn checks(&self) -> &[Check] {
        &self.checks
    }
}

/// Turns a conditional test `A` with `P(Ã | y) < eps` into the global set
/// `∪_{n ≥ f(eps)} U_n` and checks its mass is below `2 eps`.
pub fn expand_via_lemma_a(
    test: &RelativizedTest,
    joint: &JointMeasure,
    y_prefix: &Bitstring,
    eps: &Rational,
    f_eps: Option<usize>,
) -> Result<LemmaExpansionReport> {
    let a = test.enumerated_at(y_prefix);
    let mass = conditional_mass(joint, &a, y_prefix)?;
    if mass >= *eps {
        return Err(LabError::Precondition(format!(
            "P(A | \"{y_prefix}\") = {} is not below {}",
            format_rational(&mass),
            format_rational(eps)
        )));
    }
    let w = nonoverlapping_cover(&test.rects());
    let family = build_lemma_a_family(w, eps.clone(), joint.clone(), None)?;
    let f = match f_eps {
        Some(f) => f.max(1),
        None => compute_f_epsilon(&family, eps)?.index,
    };
    let n = family.levels.len();
    let witness: RectSet = (f..=n.max(f))
        .flat_map(|k| family.level(k).rects().to_vec())
        .collect::<RectSet>()
        .canonical();
    let dims = family.grid_dims();
    let global_mass = family.grid(&witness, dims)?.measure(joint)?;
    let tail_grids = tails(&family)?;
    let tail_mass = tail_grids[(f - 1).min(tail_grids.len() - 1)].measure(joint)?;
    let liminf_mass = family.grid(&family.liminf(), dims)?.measure(joint)?;
    let two_eps = eps * Rational::from_integer(2.into());
    let checks = vec![
        Check::compare(
            "tail of differences < eps",
            &ext(&tail_mass),
            Relation::Lt,
            &ext(eps),
        ),
        Check::compare(
            "liminf mass < eps",
            &ext(&liminf_mass),
            Relation::Lt,
            &ext(eps),
        ),
        Check::compare(
            "global test mass < 2 eps",
            &ext(&global_mass),
            Relation::Lt,
            &ext(&two_eps),
        ),
    ];
    Ok(LemmaExpansionReport {
        reading: SECTION_READING,
        y_prefix: y_prefix.clone(),
        epsilon: eps.clone(),
        conditional_mass: mass,
        f_epsilon: f,
        family,
        witness,
        tail_mass,
        liminf_mass,
        global_mass,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::bs;
    use crate::rational::ratio;
    use crate::testlab::Stage;

    fn rects(v: &[(&str, &str)]) -> RectSet {
        v.iter().map(|(x, y)| Rect::new(bs(x), bs(y))).collect()
    }

    #[test]
    fn single_pair_family() {
        let j = JointMeasure::uniform_product();
        let inst =
            build_lemma_a_family(rects(&[("0", "1")]), ratio(3, 4), j.clone(), None).unwrap();
        assert_eq!(inst.levels[0].u, rects(&[("0", "1")]));
        assert_eq!(inst.levels[0].atoms.len(), 2);

        let r = verify_lemma_a(&inst, &bs("1"), 2).unwrap();
        assert!(r.passed(), "{:?}", r.checks);
        assert_eq!(r.liminf_section, [bs("0")].into_iter().collect());
        assert!(r.checks.iter().all(|c| c.note.is_none()));

        let small =
            build_lemma_a_family(rects(&[("0", "1")]), ratio(1, 4), j.clone(), None).unwrap();
        assert!(small.levels[0].u.is_empty());

        let none = build_lemma_a_family(RectSet::empty(), ratio(1, 2), j.clone(), None).unwrap();
        assert!(none.levels.is_empty());
        let r = verify_lemma_a(&none, &bs("01"), 2).unwrap();
        assert!(r.passed());
        assert!(r.liminf_mass.is_zero());
    }

    #[test]
    fn rejects_overlap_and_null_atoms() {
        let j = JointMeasure::uniform_product();
        assert!(
            build_lemma_a_family(rects(&[("0", ""), ("00", "1")]), ratio(1, 2), j, None).is_err()
        );
        let z = crate::measure::Measure::bernoulli(ratio(0, 1)).unwrap();
        let j = JointMeasure::product(crate::measure::Measure::uniform(), z);
        assert!(matches!(
            build_lemma_a_family(rects(&[("0", "1")]), ratio(1, 2), j, None),
            Err(LabError::NullAtom { .. })
        ));
    }

    #[test]
    fn f_epsilon_examples() {
        let j = JointMeasure::uniform_product();
        let inst =
            build_lemma_a_family(rects(&[("0", "1")]), ratio(3, 4), j.clone(), None).unwrap();
        assert_eq!(compute_f_epsilon(&inst, &ratio(1, 1)).unwrap().index, 1);
        assert!(matches!(
            compute_f_epsilon(&inst, &ratio(0, 1)),
            Err(LabError::NoValidIndex(_))
        ));

        // Ũ_1 = Δ(0)×Δ(0); adding Δ(1)×Δ(0) pushes the section mass to 1
        let two = build_lemma_a_family(
            rects(&[("0", "0"), ("1", "0")]),
            ratio(3, 4),
            j.clone(),
            None,
        )
        .unwrap();
        let f = compute_f_epsilon(&two, &ratio(1, 8)).unwrap();
        assert_eq!(f.tail_masses[0], ratio(1, 4));
        assert_eq!(f.index, 2);

        // identical levels: every difference is empty
        let same =
            build_lemma_a_family(rects(&[("0", "1"), ("1", "1")]), ratio(2, 1), j, None).unwrap();
        assert_eq!(compute_f_epsilon(&same, &ratio(1, 100)).unwrap().index, 1);
    }

    #[test]
    fn expansion_examples() {
        let j = JointMeasure::uniform_product();
        let empty = RelativizedTest::default();
        let r = expand_via_lemma_a(&empty, &j, &bs("1"), &ratio(1, 2), None).unwrap();
        assert!(r.passed() && r.global_mass.is_zero());

        let t = RelativizedTest::new(vec![Stage {
            y: bs("1"),
            items: [bs("0")].into_iter().collect(),
        }]);
        let r = expand_via_lemma_a(&t, &j, &bs("1"), &ratio(3, 4), None).unwrap();
        assert!(r.passed());
        assert_eq!(r.conditional_mass, ratio(1, 2));
        assert_eq!(r.global_mass, ratio(1, 4));
        assert!(expand_via_lemma_a(&t, &j, &bs("1"), &ratio(1, 2), None).is_err());
    }
}
