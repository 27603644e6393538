//! Fixed-seed instances shared by the benchmarks, so every run measures the
//! same work.

use randlab_core::sample::{
    lemma_a_trial, random_example_params, random_expansion_instance, random_table_measure, rng,
};
use randlab_core::{
    build_example, build_lemma_a_family, Bitstring, ExpansionInstance, JointMeasure,
    LemmaAInstance, Measure,
};

pub fn example_measure(seed: u64) -> JointMeasure {
    build_example(random_example_params(&mut rng(seed))).expect("generated parameters are valid")
}

/// A likelihood-ratio pair with `P` charging every cylinder.
pub fn measure_pair(seed: u64, depth: usize) -> (Measure, Measure) {
    let mut r = rng(seed);
    let p = Measure::table(random_table_measure(&mut r, depth, true));
    let q = Measure::table(random_table_measure(&mut r, depth, false));
    (p, q)
}

/// A decomposition instance together with the `y`-prefix to verify along.
pub fn lemma_instance(seed: u64) -> (LemmaAInstance, Bitstring) {
    let t = lemma_a_trial(&mut rng(seed));
    let inst = build_lemma_a_family(t.w, t.epsilon, t.joint, None).expect("trial premise holds");
    (inst, t.y_prefix)
}

pub fn expansion_instance(seed: u64, depth: usize) -> ExpansionInstance {
    random_expansion_instance(&mut rng(seed), depth)
}
