//! Invariants over seeded random instances.

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

use randlab_core::martingale::expectation;
use randlab_core::measure::grid::LeafGrid;
use randlab_core::rational::ratio;
use randlab_core::sample::random_example_params;
use randlab_core::sample::{
    lemma_a_trial, random_expansion_instance, random_joint_table, random_nonoverlapping,
    random_table_measure, random_word, rng,
};
use randlab_core::{
    build_example, build_lemma_a_family, check_consistency, check_joint_consistency,
    check_submartingale, classify, doob_check, nonoverlapping_cover, rect_set_measure,
    thmain_expand, verify_example_invariants, verify_lemma_a, verify_ratio_bounds, Bitstring,
    ExtendedRational, JointMeasure, Measure, RatioProcess, RectSet, Verdict,
};

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config(48))]

    #[test]
    fn random_tables_are_consistent(seed: u64, depth in 1usize..=6, positive: bool) {
        let m = Measure::table(random_table_measure(&mut rng(seed), depth, positive));
        prop_assert!(check_consistency(&m, depth + 2).unwrap().pass());
    }

    #[test]
    fn random_joint_tables_are_consistent(seed: u64, dx in 0usize..=3, dy in 0usize..=3) {
        let j = JointMeasure::table(random_joint_table(&mut rng(seed), dx, dy, false));
        prop_assert!(check_joint_consistency(&j, 4).unwrap().pass());
    }

    #[test]
    fn example_measures_are_consistent(seed: u64) {
        let p = build_example(random_example_params(&mut rng(seed))).unwrap();
        prop_assert!(check_joint_consistency(&p, 4).unwrap().pass());
        let eps = p.as_example().unwrap().epsilon().clone();
        prop_assert!(verify_ratio_bounds(&p, &eps, 4).unwrap().passed());
        prop_assert!(verify_example_invariants(&p, 4).unwrap().passed());
    }

    /// `Q/P` is a martingale under `P` whenever `P` charges every cylinder.
    #[test]
    fn likelihood_ratio_is_a_martingale(seed: u64, dp in 1usize..=4, dq in 1usize..=4) {
        let mut r = rng(seed);
        let p = Measure::table(random_table_measure(&mut r, dp, true));
        let q = Measure::table(random_table_measure(&mut r, dq, false));
        let proc = RatioProcess::likelihood(p.clone(), q);
        let rep = check_submartingale(&p, &proc, 7).unwrap();
        prop_assert!(rep.martingale, "{:?}", rep.violations.first());
        for n in 0..=7 {
            prop_assert_eq!(expectation(&p, &proc, n).unwrap(), ExtendedRational::one());
        }
    }

    #[test]
    fn doob_bound_for_martingales(seed: u64, dp in 1usize..=4, dq in 1usize..=4) {
        let mut r = rng(seed);
        let p = Measure::table(random_table_measure(&mut r, dp, true));
        let q = Measure::table(random_table_measure(&mut r, dq, false));
        let proc = RatioProcess::likelihood(p.clone(), q);
        let rep = doob_check(&p, &proc, 8, &[1, 2, 3, 5, 8], None).unwrap();
        prop_assert!(rep.passed(), "{:?}", rep.checks);
    }

    /// With `P` allowed to vanish, `Q/P` is only a supermartingale: its mean
    /// never exceeds 1, and the maximal inequality holds with the initial
    /// mean in place of the final one.
    #[test]
    fn ratio_supermartingale(seed: u64, dp in 1usize..=4, dq in 1usize..=4) {
        let mut r = rng(seed);
        let p = Measure::table(random_table_measure(&mut r, dp, false));
        let q = Measure::table(random_table_measure(&mut r, dq, true));
        let proc = RatioProcess::likelihood(p.clone(), q);
        for n in 0..=6 {
            prop_assert!(expectation(&p, &proc, n).unwrap() <= ExtendedRational::one());
        }
        let rep = doob_check(&p, &proc, 8, &[1, 2, 3, 5, 8], None).unwrap();
        for l in &rep.levels {
            let bound = ExtendedRational::Finite(ratio(1, l.threshold as i64));
            prop_assert!(l.exceed_mass <= bound, "m = {}", l.threshold);
        }
    }

    #[test]
    fn running_extremes_are_monotone(seed: u64, len in 0usize..=12) {
        let mut r = rng(seed);
        let p = Measure::table(random_table_measure(&mut r, 3, false));
        let q = Measure::table(random_table_measure(&mut r, 3, false));
        let x = random_word(&mut r, len, len);
        let rep = classify(&p, &q, &x, &ratio(1, 2)).unwrap();
        prop_assert!(rep.passed());
        prop_assert_eq!(rep.ratios.len(), len + 1);
    }

    #[test]
    fn cover_is_disjoint_and_preserves_measure(seed: u64) {
        let mut r = rng(seed);
        let t: RectSet = (0..r.random_range(0..=6))
            .map(|_| randlab_core::Rect::new(random_word(&mut r, 0, 3), random_word(&mut r, 0, 3)))
            .collect();
        let cover = nonoverlapping_cover(&t);
        prop_assert!(cover.is_pairwise_disjoint());
        let a = LeafGrid::from_rects(&t, 3, 3).unwrap();
        let b = LeafGrid::from_rects(&cover, 3, 3).unwrap();
        prop_assert_eq!(&a, &b);
        let j = JointMeasure::table(random_joint_table(&mut r, 3, 3, false));
        prop_assert_eq!(rect_set_measure(&j, &cover).unwrap(), a.measure(&j).unwrap());
    }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn decomposition_identities_hold(seed: u64) {
        let trial = lemma_a_trial(&mut rng(seed));
        let inst = build_lemma_a_family(trial.w, trial.epsilon, trial.joint, None).unwrap();
        let rep = verify_lemma_a(&inst, &trial.y_prefix, 5).unwrap();
        prop_assert!(rep.passed(), "{:?}", rep.checks.iter().filter(|c| !c.pass).collect::<Vec<_>>());
        prop_assert!(rep.checks.iter().all(|c| c.note.is_none()), "premise should hold");
    }

    /// The last level depends on `W` as a set, not on its enumeration order.
    #[test]
    fn final_level_ignores_enumeration_order(seed: u64) {
        let mut r = rng(seed);
        let w = random_nonoverlapping(&mut r, 8, 4);
        let joint = JointMeasure::table(random_joint_table(&mut r, 4, 4, true));
        let eps = ratio(r.random_range(1..=8), 8);
        let mut shuffled = w.rects().to_vec();
        shuffled.shuffle(&mut r);
        let a = build_lemma_a_family(w, eps.clone(), joint.clone(), Some(4)).unwrap();
        let b = build_lemma_a_family(RectSet::new(shuffled), eps, joint, Some(4)).unwrap();
        let ga = LeafGrid::from_rects(&a.liminf(), 4, 4).unwrap();
        let gb = LeafGrid::from_rects(&b.liminf(), 4, 4).unwrap();
        prop_assert_eq!(ga, gb);
    }

    #[test]
    fn sections_grow(seed: u64) {
        let mut r = rng(seed);
        let w = random_nonoverlapping(&mut r, 8, 4);
        let joint = JointMeasure::table(random_joint_table(&mut r, 4, 4, true));
        let inst = build_lemma_a_family(w, ratio(1, 2), joint, Some(4)).unwrap();
        for n in 1..inst.levels.len() {
            for y in Bitstring::all_of_length(4) {
                prop_assert!(inst.section(n, &y).is_subset_of(&inst.section(n + 1, &y)));
            }
        }
    }

    #[test]
    fn expansion_chain_holds(seed: u64) {
        let inst = random_expansion_instance(&mut rng(seed), 4);
        let rep = thmain_expand(&inst, 4).unwrap();
        prop_assert!(rep.passed(), "{:?}", rep.checks.iter().filter(|c| !c.pass).collect::<Vec<_>>());
        prop_assert!(rep.v.is_subset_of(&rep.v_prime));
    }
}
