//! Exact, finitely checkable tools for algorithmic randomness on Cantor space.
//!
//! Everything works on cylinders `Δ(w)` with exact rational arithmetic and
//! explicit depth caps; nothing here approximates with floats.

pub mod bits;
pub mod error;
pub mod example;
pub mod martingale;
pub mod measure;
pub mod rational;
pub mod report;
pub mod sample;
pub mod testlab;

pub use bits::Bitstring;
pub use error::{LabError, Result};
pub use example::{
    build_example, conditional_deviation, verify_example_invariants, verify_ratio_bounds,
    ExampleMeasure, ExampleParams, MachineTable,
};
pub use martingale::{
    check_bounded_in_probability, check_effective_approximation, check_submartingale, classify,
    doob_check, equivalence_certificate, joint_equivalence_certificate, likelihood_ratio,
    ApproximationScheme, GFunction, GValue, ProbBoundCertificate, RatioProcess,
};
pub use measure::{
    check_consistency, check_joint_consistency, nonoverlapping_cover, prefix_set_measure,
    rect_set_measure, JointMeasure, JointTable, Measure, PrefixSet, Rect, RectSet, TableMeasure,
    DEFAULT_DEPTH_CAP,
};
pub use rational::{format_rational, parse_rational, ExtendedRational, Rational};
pub use report::{Check, Relation, Verdict};
pub use testlab::{
    build_lemma_a_family, compute_f_epsilon, expand_via_lemma_a, thmain_expand, thmain_probe,
    verify_blind_test, verify_lemma_a, verify_solovay, ExpansionInstance, LemmaAInstance,
    PartialBound, RelativizedTest, Stage, TestFamily,
};
