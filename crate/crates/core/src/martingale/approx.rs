//! `g`-effective approximation: `f(x,n) ≤ g(r_n(x)) ≤ f(x,n) + c`.
//!
//! Values of `g` are kept exact. The dyadic logarithm of a rational that is
//! not a power of two is irrational, so it is carried symbolically and
//! compared against rationals through `a^s` versus `2^p`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use super::RatioProcess;
use crate::bits::Bitstring;
use crate::error::{LabError, Result};
use crate::rational::{
    ceil_int, exact_log2, floor_log2, parse_rational, two_pow, ExtendedRational, Rational,
};
use crate::report::{Check, Relation, Verdict};

/// An exact value of `g` or `f`.
#[derive(Clone, Debug)]
pub enum GValue {
    NegInf,
    Finite(Rational),
    /// `log2(a)` for positive `a` that is not a power of two.
    Log2(Rational),
    PosInf,
}

impl GValue {
    pub fn log2(a: &Rational) -> Self {
        match exact_log2(a) {
            Some(k) => Self::Finite(Rational::from_integer(k.into())),
            None => Self::Log2(a.clone()),
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Self::NegInf => 0,
            Self::Finite(_) | Self::Log2(_) => 1,
            Self::PosInf => 2,
        }
    }

    /// `self + c` for a natural shift.
    fn shifted(&self, c: u64) -> Self {
        match self {
            Self::Finite(q) => Self::Finite(q + Rational::from_integer(c.into())),
            Self::Log2(a) => Self::log2(&(a * two_pow(c as i64))),
            other => other.clone(),
        }
    }
}

/// `log2(a)` against `q`.
fn cmp_log2(a: &Rational, q: &Rational) -> Ordering {
    let k = floor_log2(a);
    let kq = Rational::from_integer(k.into());
    // k < log2(a) < k + 1 since `a` is not a power of two
    if *q <= kq {
        return Ordering::Greater;
    }
    if *q >= kq + Rational::from_integer(1.into()) {
        return Ordering::Less;
    }
    let s = q
        .denom()
        .to_u32()
        .expect("denominator of an f value fits in 32 bits");
    let p = q.numer();
    let lhs = num_traits::pow(a.clone(), s as usize);
    let rhs = two_pow(p.to_i64().expect("numerator fits in 64 bits"));
    lhs.cmp(&rhs)
}

impl Ord for GValue {
    fn cmp(&self, other: &Self) -> Ordering {
        use GValue::*;
        match (self, other) {
            (Finite(a), Finite(b)) => a.cmp(b),
            (Log2(a), Log2(b)) => a.cmp(b),
            (Log2(a), Finite(q)) => cmp_log2(a, q),
            (Finite(q), Log2(a)) => cmp_log2(a, q).reverse(),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl PartialOrd for GValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for GValue {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for GValue {}

impl fmt::Display for GValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NegInf => f.write_str("-inf"),
            Self::PosInf => f.write_str("inf"),
            Self::Finite(q) => write!(f, "{}", ExtendedRational::Finite(q.clone())),
            Self::Log2(a) => write!(f, "log2({})", ExtendedRational::Finite(a.clone())),
        }
    }
}

impl FromStr for GValue {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "-inf" => Ok(Self::NegInf),
            "inf" => Ok(Self::PosInf),
            other => parse_rational(other).map(Self::Finite),
        }
    }
}

impl Serialize for GValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// The strictly increasing map `g`.
#[derive(Clone, Debug)]
pub enum GFunction {
    DyadicLog,
    /// Exact values on the listed points only.
    Table(BTreeMap<Rational, Rational>),
}

impl GFunction {
    pub fn eval(&self, r: &ExtendedRational) -> Result<GValue> {
        let r = match r {
            ExtendedRational::Infinite => return Ok(GValue::PosInf),
            ExtendedRational::Finite(r) => r,
        };
        match self {
            Self::DyadicLog if r.is_zero() => Ok(GValue::NegInf),
            Self::DyadicLog if r.is_negative() => Err(LabError::GUndefined(r.to_string())),
            Self::DyadicLog => Ok(GValue::log2(r)),
            Self::Table(t) => t.get(r).cloned().map(GValue::Finite).ok_or_else(|| {
                LabError::GUndefined(ExtendedRational::Finite(r.clone()).to_string())
            }),
        }
    }

    /// Rejects a table that is not strictly increasing.
    pub fn validate(&self) -> Result<()> {
        if let Self::Table(t) = self {
            let pts: Vec<_> = t.iter().collect();
            for w in pts.windows(2) {
                let ((a, ga), (b, gb)) = (w[0], w[1]);
                if ga >= gb {
                    let s = |r: &Rational| ExtendedRational::Finite(r.clone()).to_string();
                    return Err(LabError::GNotMonotone {
                        a: s(a),
                        ga: s(ga),
                        b: s(b),
                        gb: s(gb),
                    });
                }
            }
        }
        Ok(())
    }

    /// Whether `g` restricted to the naturals `0..=up_to` is known exactly.
    fn exact_on_naturals(&self, up_to: &BigInt) -> bool {
        match self {
            Self::DyadicLog => true,
            Self::Table(t) => {
                let mut k = BigInt::zero();
                while k <= *up_to {
                    if !t.contains_key(&Rational::from_integer(k.clone())) {
                        return false;
                    }
                    k += 1;
                }
                true
            }
        }
    }

    fn label(&self) -> &'static str {
        match self {
            Self::DyadicLog => "dyadic-log",
            Self::Table(_) => "table",
        }
    }
}

type FFn = Arc<dyn Fn(&Bitstring, usize) -> Option<GValue> + Send + Sync>;

/// `(g, f, c)`; `f` may be `-inf`.
#[derive(Clone)]
pub struct ApproximationScheme {
    pub g: GFunction,
    f: FFn,
    pub c: u64,
}

impl fmt::Debug for ApproximationScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ApproximationScheme({}, c = {})", self.g.label(), self.c)
    }
}

impl ApproximationScheme {
    pub fn new(
        g: GFunction,
        f: impl Fn(&Bitstring, usize) -> Option<GValue> + Send + Sync + 'static,
        c: u64,
    ) -> Self {
        Self {
            g,
            f: Arc::new(f),
            c,
        }
    }

    /// `f` from an explicit table keyed by `(x, n)`, falling back to `default`.
    pub fn from_table(
        g: GFunction,
        table: BTreeMap<(Bitstring, usize), GValue>,
        default: Option<GValue>,
        c: u64,
    ) -> Self {
        Self::new(
            g,
            move |x, n| {
                table
                    .get(&(x.clone(), n))
                    .cloned()
                    .or_else(|| default.clone())
            },
            c,
        )
    }

    pub fn f(&self, x: &Bitstring, n: usize) -> Result<GValue> {
        (self.f)(x, n)
            .ok_or_else(|| LabError::Precondition(format!("f undefined at (\"{x}\", {n})")))
    }

    pub(crate) fn f_at(&self, x: &Bitstring) -> Result<GValue> {
        self.f(x, x.len())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SandwichViolation {
    pub x: Bitstring,
    pub n: usize,
    pub f: GValue,
    pub g: GValue,
    pub f_plus_c: GValue,
}

#[derive(Clone, Debug, Serialize)]
pub struct ApproxReport {
    pub depth: usize,
    pub g: &'static str,
    pub c: u64,
    pub points: usize,
    /// Least natural `c` with `g(r_n(x)) ≤ f(x,n) + c` on every evaluated node.
    pub tightest_c: Option<u64>,
    pub strong: bool,
    pub violation_count: usize,
    pub violations: Vec<SandwichViolation>,
    pub checks: Vec<Check>,
}

impl Verdict for ApproxReport {
    fn checks(&self) -> &[Check] {
        &self.checks
    }
}

const SHOWN_VIOLATIONS: usize = 32;

/// Least natural `k` with `g ≤ f + k`, if any.
fn least_shift(g: &GValue, f: &GValue) -> Option<u64> {
    match (g, f) {
        (GValue::NegInf, _) => Some(0),
        (GValue::PosInf, _) | (_, GValue::NegInf) => None,
        (_, GValue::PosInf) => Some(0),
        (GValue::Finite(q), GValue::Finite(fv)) => {
            Some(ceil_int(&(q - fv)).max(BigInt::zero()).to_u64()?)
        }
        (GValue::Log2(a), GValue::Finite(fv)) => {
            let floor = Rational::from_integer(floor_log2(a).into());
            let mut k = ceil_int(&(floor - fv)).max(BigInt::zero());
            while *g > GValue::Finite(fv + Rational::from_integer(k.clone())) {
                k += 1;
            }
            k.to_u64()
        }
        (_, GValue::Log2(_)) => unreachable!("f takes rational values"),
    }
}

/// Checks the sandwich at every `|x| = n`, `1 ≤ n ≤ depth`.
pub fn check_effective_approximation(
    proc: &RatioProcess,
    scheme: &ApproximationScheme,
    depth: usize,
) -> Result<ApproxReport> {
    scheme.g.validate()?;
    let mut seen: BTreeMap<ExtendedRational, GValue> = BTreeMap::new();
    let mut violations = Vec::new();
    let mut tightest = Some(0u64);
    let mut points = 0;
    for n in 1..=depth {
        for x in Bitstring::all_of_length(n) {
            let r = proc.value(&x)?;
            let g = scheme.g.eval(&r)?;
            seen.insert(r, g.clone());
            let f = scheme.f(&x, n)?;
            let upper = f.shifted(scheme.c);
            tightest = match (tightest, least_shift(&g, &f)) {
                (Some(a), Some(b)) => Some(a.max(b)),
                _ => None,
            };
            if f > g || g > upper {
                violations.push(SandwichViolation {
                    x,
                    n,
                    f,
                    g,
                    f_plus_c: upper,
                });
            }
            points += 1;
        }
    }
    // strict monotonicity over the evaluated points
    let pts: Vec<_> = seen.iter().collect();
    for w in pts.windows(2) {
        if w[0].1 >= w[1].1 {
            return Err(LabError::GNotMonotone {
                a: w[0].0.to_string(),
                ga: w[0].1.to_string(),
                b: w[1].0.to_string(),
                gb: w[1].1.to_string(),
            });
        }
    }
    let max_natural = seen
        .keys()
        .filter_map(|r| r.finite().map(|q| q.floor().to_integer()))
        .max()
        .unwrap_or_default();
    let strong = scheme.g.exact_on_naturals(&max_natural);

    let violation_count = violations.len();
    violations.truncate(SHOWN_VIOLATIONS);
    let mut checks = vec![Check::decided(
        format!("f <= g(r) <= f + {} on every node", scheme.c),
        violation_count.to_string(),
        Relation::Eq,
        "0",
        violation_count == 0,
    )
    .with_note("violations counted")];
    if let Some(first) = violations.first() {
        checks.push(
            Check::decided(
                format!("sandwich at \"{}\"", first.x),
                first.g.to_string(),
                Relation::Holds,
                format!("[{}, {}]", first.f, first.f_plus_c),
                false,
            )
            .with_note(format!("first violation, depth {}", first.n)),
        );
    }
    Ok(ApproxReport {
        depth,
        g: scheme.g.label(),
        c: scheme.c,
        points,
        tightest_c: tightest,
        strong,
        violation_count,
        violations,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Measure;
    use crate::rational::{int, ratio};

    fn zero_path_f(shift: i64) -> impl Fn(&Bitstring, usize) -> Option<GValue> + Send + Sync {
        move |x, n| {
            Some(if x.bits().iter().all(|b| !b) {
                GValue::Finite(int(n as i64 + shift))
            } else {
                GValue::NegInf
            })
        }
    }

    #[test]
    fn exact_log_comparisons() {
        let l3 = GValue::log2(&int(3));
        assert!(l3 > GValue::Finite(int(1)) && l3 < GValue::Finite(int(2)));
        assert!(l3 > GValue::Finite(ratio(3, 2))); // 3^2 = 9 > 2^3 = 8
        assert!(l3 < GValue::Finite(ratio(8, 5))); // 3^5 = 243 < 2^8 = 256
        assert_eq!(GValue::log2(&int(8)), GValue::Finite(int(3)));
        assert_eq!(GValue::log2(&ratio(1, 4)), GValue::Finite(int(-2)));
        assert!(GValue::NegInf < GValue::log2(&ratio(1, 1000)));
        assert!(GValue::PosInf > GValue::Finite(int(1 << 40)));
        assert_eq!(least_shift(&l3, &GValue::Finite(int(0))), Some(2));
        assert_eq!(least_shift(&l3, &GValue::Finite(int(1))), Some(1));
        assert_eq!(least_shift(&GValue::Finite(int(1)), &GValue::NegInf), None);
    }

    #[test]
    fn identity_ratio_passes() {
        let u = Measure::uniform();
        let proc = RatioProcess::likelihood(u.clone(), u);
        let s =
            ApproximationScheme::new(GFunction::DyadicLog, |_, _| Some(GValue::Finite(int(0))), 1);
        let r = check_effective_approximation(&proc, &s, 5).unwrap();
        assert!(r.passed());
        assert_eq!(r.tightest_c, Some(0));
        assert!(r.strong);
    }

    #[test]
    fn point_mass_on_zeros() {
        let u = Measure::uniform();
        let z = Measure::bernoulli(ratio(0, 1)).unwrap();
        let proc = RatioProcess::likelihood(u, z);
        let s = ApproximationScheme::new(GFunction::DyadicLog, zero_path_f(0), 1);
        let r = check_effective_approximation(&proc, &s, 6).unwrap();
        assert!(r.passed(), "{:?}", r.violations);
        assert_eq!(r.tightest_c, Some(0));

        let shifted = ApproximationScheme::new(GFunction::DyadicLog, zero_path_f(1), 0);
        let r = check_effective_approximation(&proc, &shifted, 6).unwrap();
        assert!(!r.passed());
        assert_eq!(r.violations[0].n, 1);
        assert_eq!(r.violations[0].x, Bitstring::repeat(false, 1));
    }

    #[test]
    fn tables_for_g() {
        let u = Measure::uniform();
        let proc = RatioProcess::likelihood(u.clone(), u);
        let bad = GFunction::Table([(int(0), int(1)), (int(1), int(1))].into_iter().collect());
        let s = ApproximationScheme::new(bad, |_, _| Some(GValue::Finite(int(0))), 1);
        assert!(matches!(
            check_effective_approximation(&proc, &s, 2),
            Err(LabError::GNotMonotone { .. })
        ));

        let sparse = GFunction::Table([(int(1), int(0))].into_iter().collect());
        let s = ApproximationScheme::new(sparse, |_, _| Some(GValue::Finite(int(0))), 0);
        let r = check_effective_approximation(&proc, &s, 3).unwrap();
        assert!(r.passed() && !r.strong);

        let full = GFunction::Table([(int(0), int(-5)), (int(1), int(0))].into_iter().collect());
        let s = ApproximationScheme::new(full, |_, _| Some(GValue::Finite(int(0))), 0);
        assert!(check_effective_approximation(&proc, &s, 3).unwrap().strong);

        let missing = GFunction::Table(BTreeMap::new());
        let s = ApproximationScheme::new(missing, |_, _| Some(GValue::Finite(int(0))), 0);
        assert!(matches!(
            check_effective_approximation(&proc, &s, 1),
            Err(LabError::GUndefined(_))
        ));
    }
}
