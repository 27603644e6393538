//! Expanding a conditional test at an oracle into a joint test.
//!
//! With a second measure `Q` whose conditionals are comparable to those of
//! `P` (ratio bounded below by `c1`, dominated by a bound function `f_y`
//! that stays below `c2`), a set `U` of small conditional `P`-mass yields
//! `V ⊆ V′` of small conditional `Q`-mass, then a joint rectangle set `W`
//! whose section at the oracle is `Ṽ`, then the filtered `W′` of small
//! joint `P`-mass.

use std::collections::BTreeMap;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::{conditional_mass, ext};
use crate::bits::Bitstring;
use crate::error::{LabError, Result};
use crate::measure::{JointMeasure, PrefixSet, Rect, RectSet};
use crate::rational::{
    format_rational, half_pow, ratio, serde_rational, ExtendedRational, Rational,
};
use crate::report::{Check, Relation, Verdict};

/// A partial map `x ↦ f_y(x)`: explicit entries, else an optional constant.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartialBound {
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        with = "opt_rational"
    )]
    pub default: Option<Rational>,
    #[serde(default, with = "entries")]
    pub entries: BTreeMap<Bitstring, Rational>,
}

mod opt_rational {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::rational::{format_rational, parse_rational, Rational};

    pub fn serialize<S: Serializer>(v: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(r) => s.serialize_str(&format_rational(r)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rational>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|s| parse_rational(&s).map_err(serde::de::Error::custom))
            .transpose()
    }
}

mod entries {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serializer};

    use crate::bits::Bitstring;
    use crate::rational::{format_rational, parse_rational, Rational};

    pub fn serialize<S: Serializer>(
        m: &BTreeMap<Bitstring, Rational>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        s.collect_map(m.iter().map(|(k, v)| (k.to_string(), format_rational(v))))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<BTreeMap<Bitstring, Rational>, D::Error> {
        BTreeMap::<String, String>::deserialize(d)?
            .into_iter()
            .map(|(k, v)| {
                let k = k.parse().map_err(serde::de::Error::custom)?;
                let v = parse_rational(&v).map_err(serde::de::Error::custom)?;
                Ok((k, v))
            })
            .collect()
    }
}

impl PartialBound {
    pub fn constant(c: Rational) -> Self {
        Self {
            default: Some(c),
            entries: BTreeMap::new(),
        }
    }

    pub fn get(&self, x: &Bitstring) -> Option<&Rational> {
        self.entries.get(x).or(self.default.as_ref())
    }
}

fn cond_ratio(
    p: &JointMeasure,
    q: &JointMeasure,
    x: &Bitstring,
    y: &Bitstring,
) -> Result<ExtendedRational> {
    Ok(ExtendedRational::ratio(
        &q.conditional(x, y)?,
        &p.conditional(x, y)?,
    ))
}

fn require_positive_oracle(p: &JointMeasure, q: &JointMeasure, y: &Bitstring) -> Result<()> {
    for w in y.prefixes() {
        if p.marginal_y(&w)?.is_zero() || q.marginal_y(&w)?.is_zero() {
            return Err(LabError::ZeroCondition { y: w });
        }
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeStep {
    pub x: Bitstring,
    #[serde(with = "serde_rational")]
    pub p: Rational,
    #[serde(with = "serde_rational")]
    pub q: Rational,
    /// `Q(x|y) / P(x|y)`.
    pub ratio: ExtendedRational,
    pub running_inf: ExtendedRational,
    #[serde(skip_serializing_if = "Option::is_none", with = "opt_rational")]
    pub bound: Option<Rational>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeReport {
    pub x: Bitstring,
    pub y: Bitstring,
    pub steps: Vec<ProbeStep>,
    pub sup_bound: Option<ExtendedRational>,
    pub inf_ratio: ExtendedRational,
    /// Suggested `c1`: half the running infimum.
    pub c1: Option<ExtendedRational>,
    /// Suggested `c2`: twice the supremum of `f_y`, so the supremum stays strictly below.
    pub c2: Option<ExtendedRational>,
    pub failures: Vec<String>,
    pub checks: Vec<Check>,
}

impl Verdict for ProbeReport {
    fn checks(&self) -> &[Check] {
        &self.checks
    }
}

/// Finite-depth check of the comparison conditions along the prefixes of
/// `x` at oracle prefix `y`: positivity of `P(·|y)`, the sandwich
/// `Q/P < f_y < ∞`, and the running infimum of `Q/P`.
pub fn thmain_probe(
    p: &JointMeasure,
    q: &JointMeasure,
    x: &Bitstring,
    y: &Bitstring,
    f_y: &PartialBound,
) -> Result<ProbeReport> {
    require_positive_oracle(p, q, y)?;
    let mut steps = Vec::new();
    let mut checks = Vec::new();
    let mut failures = Vec::new();
    let mut inf = ExtendedRational::Infinite;
    let mut sup: Option<Rational> = None;
    for w in x.prefixes() {
        let pw = p.conditional(&w, y)?;
        let qw = q.conditional(&w, y)?;
        let r = ExtendedRational::ratio(&qw, &pw);
        inf = inf.min(r.clone());
        let positive = pw > Rational::zero();
        checks.push(Check::compare(
            format!("P(\"{w}\"|y) > 0"),
            &ext(&pw),
            Relation::Gt,
            &ExtendedRational::zero(),
        ));
        if !positive {
            failures.push(format!("positivity fails at \"{w}\""));
        }
        let bound = f_y.get(&w).cloned();
        if let Some(b) = &bound {
            let c = Check::compare(format!("Q/P < f_y at \"{w}\""), &r, Relation::Lt, &ext(b));
            if !c.pass {
                failures.push(format!("bound fails at \"{w}\""));
            }
            checks.push(c);
            sup = Some(match sup {
                Some(s) if s >= *b => s,
                _ => b.clone(),
            });
        }
        steps.push(ProbeStep {
            x: w,
            p: pw,
            q: qw,
            ratio: r,
            running_inf: inf.clone(),
            bound,
        });
    }
    let inf_positive = inf > ExtendedRational::zero();
    checks.push(Check::compare(
        "running inf of Q/P > 0",
        &inf,
        Relation::Gt,
        &ExtendedRational::zero(),
    ));
    if !inf_positive {
        failures.push("running infimum is zero".into());
    }
    let c1 = match &inf {
        ExtendedRational::Finite(v) if inf_positive => Some(ext(&(v * ratio(1, 2)))),
        _ => None,
    };
    let c2 = sup
        .as_ref()
        .map(|s| ext(&(s * Rational::from_integer(2.into()))));
    Ok(ProbeReport {
        x: x.clone(),
        y: y.clone(),
        steps,
        sup_bound: sup.map(ExtendedRational::Finite),
        inf_ratio: inf,
        c1,
        c2,
        failures,
        checks,
    })
}

#[derive(Clone, Debug)]
pub struct ExpansionInstance {
    pub p: JointMeasure,
    pub q: JointMeasure,
    pub y: Bitstring,
    pub u: PrefixSet,
    pub f_y: PartialBound,
    pub c1: Rational,
    pub c2: Rational,
    pub level: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExpansionReport {
    pub depth: usize,
    pub level: usize,
    pub y: Bitstring,
    #[serde(with = "serde_rational")]
    pub c1: Rational,
    #[serde(with = "serde_rational")]
    pub c2: Rational,
    #[serde(with = "serde_rational")]
    pub p_u: Rational,
    pub v: PrefixSet,
    pub v_prime: PrefixSet,
    #[serde(with = "serde_rational")]
    pub q_v: Rational,
    #[serde(with = "serde_rational")]
    pub q_v_prime: Rational,
    pub w: RectSet,
    #[serde(with = "serde_rational")]
    pub q_w: Rational,
    /// `11/2 · 2^{-level}`, the bound quoted for the cited cover
    /// construction; reported for the brute-force cover, not asserted.
    #[serde(with = "serde_rational")]
    pub cover_bound: Rational,
    pub cover_bound_met: bool,
    pub w_prime: RectSet,
    #[serde(with = "serde_rational")]
    pub p_w_prime: Rational,
    #[serde(with = "serde_rational")]
    pub q_w_prime: Rational,
    pub checks: Vec<Check>,
}

impl Verdict for ExpansionReport {
    fn checks(&self) -> &[Check] {
        &self.checks
    }
}

/// Strict `lhs < rhs`, or a vacuous pass when the set on the left is empty.
fn strict_or_vacuous(name: &str, lhs: &Rational, rhs: &Rational, empty: bool) -> Check {
    let c = Check::compare(name, &ext(lhs), Relation::Lt, &ext(rhs));
    if empty && !c.pass {
        Check { pass: true, ..c }.with_note("vacuous: empty set")
    } else {
        c
    }
}

/// Runs the expansion chain at finite depth and checks every inequality in
/// it exactly.
pub fn thmain_expand(inst: &ExpansionInstance, depth: usize) -> Result<ExpansionReport> {
    let ExpansionInstance {
        p,
        q,
        y,
        u,
        f_y,
        c1,
        c2,
        level,
    } = inst;
    if *c1 <= Rational::zero() || *c2 <= Rational::zero() {
        return Err(LabError::Precondition("c1 and c2 must be positive".into()));
    }
    let u = u.reduced();
    if depth < u.max_len() {
        return Err(LabError::DepthExceeded {
            len: u.max_len(),
            cap: depth,
        });
    }
    let (cx, _) = p.depth_caps().min(q.depth_caps());
    if depth > cx {
        return Err(LabError::DepthExceeded {
            len: depth,
            cap: cx,
        });
    }
    require_positive_oracle(p, q, y)?;
    let p_u = conditional_mass(p, &u, y)?;
    let limit = half_pow(*level) / c2;
    if p_u >= limit {
        return Err(LabError::Precondition(format!(
            "P(U|y) = {} is not below 2^-{level}/c2 = {}",
            format_rational(&p_u),
            format_rational(&limit)
        )));
    }

    let extensions: Vec<Bitstring> = u
        .iter()
        .flat_map(|z| (z.len()..=depth).flat_map(move |l| z.extensions(l).collect::<Vec<_>>()))
        .collect();
    let c2x = ext(c2);
    let mut v = Vec::new();
    let mut v_prime = Vec::new();
    for x in &extensions {
        if f_y.get(x).is_some_and(|b| b < c2) {
            v.push(x.clone());
        }
        if cond_ratio(p, q, x, y)? < c2x {
            v_prime.push(x.clone());
        }
    }
    let v = PrefixSet::new(v);
    let v_prime = PrefixSet::new(v_prime);
    let q_v = conditional_mass(q, &v, y)?;
    let q_v_prime = conditional_mass(q, &v_prime, y)?;

    // For each minimal element of V pick the oracle cylinder b ⊑ y with the
    // smallest Q-mass; the section of the result at y is exactly Ṽ.
    let mut w = Vec::new();
    for x in v.reduced().iter() {
        let mut best: Option<(Rational, Bitstring)> = None;
        for b in y.prefixes() {
            let m = q.eval(x, &b)?;
            if best.as_ref().is_none_or(|(bm, _)| m <= *bm) {
                best = Some((m, b));
            }
        }
        let (_, b) = best.expect("y has at least the empty prefix");
        w.push(Rect::new(x.clone(), b));
    }
    let w = RectSet::new(w);
    let section: PrefixSet = w
        .iter()
        .filter(|r| r.y.is_prefix_of(y))
        .map(|r| r.x.clone())
        .collect();
    let mut q_w = Rational::zero();
    for r in w.iter() {
        q_w += q.eval(&r.x, &r.y)?;
    }
    let cover_bound = ratio(11, 2) * half_pow(*level);

    let mut w_prime = Vec::new();
    let (mut p_wp, mut q_wp) = (Rational::zero(), Rational::zero());
    for r in w.iter() {
        let pc = p.conditional(&r.x, &r.y)?;
        let qc = q.conditional(&r.x, &r.y)?;
        if pc < &qc / c1 {
            p_wp += p.eval(&r.x, &r.y)?;
            q_wp += q.eval(&r.x, &r.y)?;
            w_prime.push(r.clone());
        }
    }
    let w_prime = RectSet::new(w_prime);

    let c2_p_u = c2 * &p_u;
    let checks = vec![
        Check::decided(
            "V within V'",
            v.to_string(),
            Relation::Subset,
            v_prime.to_string(),
            v.is_subset_of(&v_prime),
        ),
        Check::compare(
            "Q(V|y) <= Q(V'|y)",
            &ext(&q_v),
            Relation::Le,
            &ext(&q_v_prime),
        ),
        strict_or_vacuous(
            "Q(V'|y) < c2 P(U|y)",
            &q_v_prime,
            &c2_p_u,
            v_prime.is_empty(),
        ),
        Check::compare(
            "c2 P(U|y) < 2^-level",
            &ext(&c2_p_u),
            Relation::Lt,
            &ext(&half_pow(*level)),
        ),
        Check::decided(
            "section of W at y = V",
            section.to_string(),
            Relation::Eq,
            v.to_string(),
            section.is_subset_of(&v) && v.is_subset_of(&section),
        ),
        strict_or_vacuous("P(W') < Q(W')/c1", &p_wp, &(&q_wp / c1), w_prime.is_empty()),
    ];
    Ok(ExpansionReport {
        depth,
        level: *level,
        y: y.clone(),
        c1: c1.clone(),
        c2: c2.clone(),
        p_u,
        v,
        v_prime,
        q_v,
        q_v_prime,
        w,
        cover_bound_met: q_w < cover_bound,
        q_w,
        cover_bound,
        w_prime,
        p_w_prime: p_wp,
        q_w_prime: q_wp,
        checks,
    })
}
