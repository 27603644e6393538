//! Seeded random instances for property checks and benchmarks.
//!
//! Everything draws from a `ChaCha8Rng`, so a seed pins the instance on every
//! platform.

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bits::Bitstring;
use crate::example::{ExampleParams, MachineTable};
use crate::measure::{JointMeasure, JointTable, PrefixSet, Rect, RectSet, TableMeasure};
use crate::rational::{half_pow, ratio, Rational};
use crate::testlab::{conditional_mass, ExpansionInstance, PartialBound};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn weights(rng: &mut ChaCha8Rng, n: usize, positive: bool) -> Vec<Rational> {
    let lo = if positive { 1 } else { 0 };
    let mut w: Vec<i64> = (0..n).map(|_| rng.random_range(lo..=9)).collect();
    if w.iter().all(|&v| v == 0) {
        w[rng.random_range(0..n)] = 1;
    }
    let total: i64 = w.iter().sum();
    w.into_iter().map(|v| ratio(v, total)).collect()
}

pub fn random_word(rng: &mut ChaCha8Rng, min_len: usize, max_len: usize) -> Bitstring {
    let len = rng.random_range(min_len..=max_len);
    Bitstring::from_bits((0..len).map(|_| rng.random_bool(0.5)).collect())
}

/// A probability table of the given depth; `positive` keeps every leaf
/// strictly positive.
pub fn random_table_measure(rng: &mut ChaCha8Rng, depth: usize, positive: bool) -> TableMeasure {
    TableMeasure::from_leaves(depth, weights(rng, 1 << depth, positive)).expect("valid leaves")
}

pub fn random_joint_table(
    rng: &mut ChaCha8Rng,
    dx: usize,
    dy: usize,
    positive: bool,
) -> JointTable {
    JointTable::from_leaves(dx, dy, weights(rng, 1 << (dx + dy), positive)).expect("valid leaves")
}

/// A joint table with uniform `Y`-marginal and strictly positive,
/// randomly drawn conditionals.
pub fn random_joint_uniform_y(rng: &mut ChaCha8Rng, dx: usize, dy: usize) -> JointTable {
    let rows: Vec<Vec<Rational>> = (0..1usize << dy)
        .map(|_| weights(rng, 1 << dx, true))
        .collect();
    let scale = half_pow(dy);
    let mut leaves = vec![Rational::zero(); 1 << (dx + dy)];
    for (iy, row) in rows.iter().enumerate() {
        for (ix, v) in row.iter().enumerate() {
            leaves[(ix << dy) | iy] = v * &scale;
        }
    }
    JointTable::from_leaves(dx, dy, leaves).expect("valid leaves")
}

/// Up to `max_machines` machines, each halting on zero to two random
/// prefixes of length at most `max_trigger`.
pub fn random_machine_table(
    rng: &mut ChaCha8Rng,
    max_machines: usize,
    max_trigger: usize,
) -> MachineTable {
    let count = rng.random_range(1..=max_machines);
    let mut triggers = Vec::new();
    for n in 1..=count {
        for _ in 0..rng.random_range(0..=2) {
            triggers.push((n, random_word(rng, 0, max_trigger)));
        }
    }
    MachineTable::from_triggers(count, triggers).expect("indices in range")
}

/// `ε ∈ {1/4, 1/2, 3/4}` with a random table of at most four machines.
pub fn random_example_params(rng: &mut ChaCha8Rng) -> ExampleParams {
    let eps = ratio(rng.random_range(1..=3), 4);
    ExampleParams::new(eps, random_machine_table(rng, 4, 3))
}

/// A pairwise-disjoint rectangle list of at most `max_pairs` elements with
/// coordinates of at most `max_len` bits, in draw order.
pub fn random_nonoverlapping(rng: &mut ChaCha8Rng, max_pairs: usize, max_len: usize) -> RectSet {
    let target = rng.random_range(0..=max_pairs);
    let mut kept: Vec<Rect> = Vec::new();
    let mut attempts = 0;
    while kept.len() < target && attempts < 200 {
        attempts += 1;
        let r = Rect::new(random_word(rng, 0, max_len), random_word(rng, 0, max_len));
        if kept.iter().all(|k| !k.intersects(&r)) {
            kept.push(r);
        }
    }
    RectSet::new(kept)
}

/// One randomized decomposition trial.
#[derive(Clone, Debug)]
pub struct LemmaTrial {
    pub w: RectSet,
    pub joint: JointMeasure,
    pub epsilon: Rational,
    pub y_prefix: Bitstring,
}

/// `W` with at most 8 pairs of 4-bit coordinates, a strictly positive joint
/// table, an oracle prefix of length 5, and `ε` drawn above the conditional
/// mass of the enumerated set so the section identity is not vacuous.
pub fn lemma_a_trial(rng: &mut ChaCha8Rng) -> LemmaTrial {
    let w = random_nonoverlapping(rng, 8, 4);
    let joint = JointMeasure::table(random_joint_table(rng, 4, 4, true));
    let y_prefix = random_word(rng, 5, 5);
    let d = w.max_lens().1;
    let enumerated: PrefixSet = w
        .iter()
        .filter(|r| r.y.is_prefix_of(&y_prefix))
        .map(|r| r.x.clone())
        .collect();
    let mass = conditional_mass(&joint, &enumerated, &y_prefix.prefix(d)).expect("positive table");
    let epsilon = &mass + ratio(rng.random_range(1..=16), 16);
    LemmaTrial {
        w,
        joint,
        epsilon,
        y_prefix,
    }
}

/// A random expansion instance at leaf depth `depth` satisfying
/// `P(Ũ|y) < 2^{-level}/c2`. Both measures share the uniform `Y`-marginal.
pub fn random_expansion_instance(rng: &mut ChaCha8Rng, depth: usize) -> ExpansionInstance {
    loop {
        let uniform = JointMeasure::uniform_product;
        let (p, q) = match rng.random_range(0..3) {
            0 => (
                crate::example::build_example(random_example_params(rng)).expect("valid epsilon"),
                uniform(),
            ),
            1 => (
                uniform(),
                crate::example::build_example(random_example_params(rng)).expect("valid epsilon"),
            ),
            _ => (
                JointMeasure::table(random_joint_uniform_y(rng, 3, 3)),
                JointMeasure::table(random_joint_uniform_y(rng, 3, 3)),
            ),
        };
        let y = random_word(rng, 0, 3);
        let u: PrefixSet = (0..rng.random_range(1..=3))
            .map(|_| random_word(rng, depth.saturating_sub(2), depth))
            .collect();
        let ratio_at = |x: &Bitstring| -> Rational {
            let pc = p.conditional(x, &y).expect("positive oracle");
            let qc = q.conditional(x, &y).expect("positive oracle");
            qc / pc
        };
        let mut f_y = PartialBound::default();
        for z in u.reduced().iter() {
            for l in z.len()..=depth {
                for x in z.extensions(l) {
                    if rng.random_range(0..4) > 0 {
                        let slack = ratio(rng.random_range(11..=20), 10);
                        f_y.entries.insert(x.clone(), ratio_at(&x) * slack);
                    }
                }
            }
        }
        let Some(sup) = f_y.entries.values().max().cloned() else {
            continue;
        };
        let c2 = sup * ratio(rng.random_range(11..=20), 10);
        let inf = Bitstring::all_up_to(depth)
            .map(|x| ratio_at(&x))
            .min()
            .expect("non-empty");
        let c1 = inf * ratio(rng.random_range(1..=9), 10);
        let p_u = conditional_mass(&p, &u, &y).expect("positive oracle");
        let max_level = (1..=12).take_while(|&n| p_u < half_pow(n) / &c2).last();
        let Some(max_level) = max_level else {
            continue;
        };
        let level = rng.random_range(1..=max_level);
        return ExpansionInstance {
            p,
            q,
            y,
            u,
            f_y,
            c1,
            c2,
            level,
        };
    }
}
