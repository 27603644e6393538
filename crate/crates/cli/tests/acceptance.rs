//! Acceptance gate: seven criteria, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the summary lines always reach the
//! terminal; the process exits non-zero if any criterion fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use randlab_core::example::conditional_deviation;
use randlab_core::martingale::expectation;
use randlab_core::rational::{int, ratio};
use randlab_core::sample::{
    lemma_a_trial, random_example_params, random_expansion_instance, random_table_measure, rng,
};
use randlab_core::{
    build_example, build_lemma_a_family, check_consistency, check_joint_consistency,
    check_submartingale, classify, compute_f_epsilon, doob_check, thmain_expand,
    verify_example_invariants, verify_lemma_a, verify_ratio_bounds, Bitstring, ExampleParams,
    ExtendedRational, JointMeasure, MachineTable, Measure, RatioProcess, Rational, Verdict,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || {
        format!("took {elapsed:.1?}, limit {limit:?}")
    })
}

fn bs(s: &str) -> Bitstring {
    s.parse().expect("bit string")
}

/// Uniform, bernoulli(1/3), 20 random tables and 10 example measures are
/// consistent at depth 10.
fn consistency_suite() -> Outcome {
    let start = Instant::now();
    let mut singles = vec![Measure::uniform(), Measure::bernoulli(ratio(1, 3)).unwrap()];
    let mut r = rng(1);
    for i in 0..20 {
        let depth = 1 + i % 6;
        singles.push(Measure::table(random_table_measure(
            &mut r,
            depth,
            i % 2 == 0,
        )));
    }
    for (i, m) in singles.iter().enumerate() {
        let rep = check_consistency(m, 10).map_err(|e| e.to_string())?;
        ensure(rep.pass(), || {
            format!("measure {i}: {:?}", rep.violations.first())
        })?;
    }
    let mut r = rng(2);
    for i in 0..10 {
        let p = build_example(random_example_params(&mut r)).map_err(|e| e.to_string())?;
        let rep = check_joint_consistency(&p, 10).map_err(|e| e.to_string())?;
        ensure(rep.pass(), || {
            format!("example {i}: {:?}", rep.violations.first())
        })?;
    }
    within(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!(
        "22 measures on one coordinate, 10 example measures, in {:.1?}",
        start.elapsed()
    ))
}

/// Ratio bounds, uniform marginals, the deviation/trigger equivalence and
/// the empty-table reduction.
fn example_invariants() -> Outcome {
    let trig = MachineTable::from_triggers(1, [(1, bs("1"))]).unwrap();
    let p = build_example(ExampleParams::new(ratio(1, 2), trig)).unwrap();
    let rep = verify_ratio_bounds(&p, &ratio(1, 2), 8).map_err(|e| e.to_string())?;
    ensure(rep.passed(), || "trigger \"1\" ratio bounds".into())?;
    ensure(
        rep.min.ratio == ratio(1, 2) && rep.max.ratio == ratio(3, 2),
        || format!("extremes {} and {}", rep.min.ratio, rep.max.ratio),
    )?;

    let mut r = rng(2);
    let mut mismatches = 0;
    for i in 0..10 {
        let params = random_example_params(&mut r);
        let eps = params.epsilon.clone();
        let table = params.table.clone();
        let p = build_example(params).unwrap();
        let bounds = verify_ratio_bounds(&p, &eps, 8).map_err(|e| e.to_string())?;
        ensure(bounds.passed(), || {
            format!("example {i}: ratio bounds {:?}", bounds.violations)
        })?;
        let inv = verify_example_invariants(&p, 8).map_err(|e| e.to_string())?;
        ensure(inv.passed(), || format!("example {i}: {:?}", inv.checks))?;
        for y in Bitstring::all_up_to(8) {
            for n in 1..=table.machine_count() {
                let d = conditional_deviation(&p, n, &y).map_err(|e| e.to_string())?;
                // independent of the construction: some trigger is a proper prefix of y
                let fires = table
                    .triggers(n)
                    .any(|t| t.len() < y.len() && t.is_prefix_of(&y));
                if d.deviates != fires {
                    mismatches += 1;
                }
            }
        }
    }
    ensure(mismatches == 0, || {
        format!("{mismatches} deviation mismatches")
    })?;

    let q = JointMeasure::uniform_product();
    for eps in [ratio(1, 4), ratio(1, 2), ratio(3, 4)] {
        let p = build_example(ExampleParams::new(eps, MachineTable::empty(4))).unwrap();
        for x in Bitstring::all_up_to(6) {
            for y in Bitstring::all_up_to(6) {
                ensure(p.eval(&x, &y).unwrap() == q.eval(&x, &y).unwrap(), || {
                    format!("empty table differs at ({x}, {y})")
                })?;
            }
        }
    }
    Ok("min 1/2, max 3/2 for trigger \"1\"; 10 random tables, 0 mismatches".into())
}

/// Tower property and Doob's inequality on 50 random pairs, plus the
/// worked example.
fn martingale_suite() -> Outcome {
    let mut r = rng(3);
    let mut doob_runs = 0;
    for i in 0..50 {
        let p = Measure::table(random_table_measure(&mut r, 1 + i % 5, true));
        let q = Measure::table(random_table_measure(&mut r, 1 + (i / 5) % 5, i % 3 == 0));
        let proc = RatioProcess::likelihood(p.clone(), q);
        let tower = check_submartingale(&p, &proc, 8).map_err(|e| e.to_string())?;
        ensure(tower.martingale, || {
            format!("pair {i}: {:?}", tower.violations.first())
        })?;
        for n in 1..=10 {
            let rep = doob_check(&p, &proc, n, &[1, 2, 4, 8], None).map_err(|e| e.to_string())?;
            ensure(rep.passed(), || {
                format!("pair {i}, n = {n}: {:?}", rep.checks)
            })?;
            doob_runs += 1;
        }
    }

    let zeros = Measure::bernoulli(int(0)).unwrap();
    let u = Measure::uniform();
    let proc = RatioProcess::likelihood(u.clone(), zeros);
    let rep = doob_check(&u, &proc, 2, &[2], None).map_err(|e| e.to_string())?;
    let level = &rep.levels[0];
    ensure(
        level.exceed_mass == ExtendedRational::Finite(ratio(1, 4))
            && level.bound == ExtendedRational::Finite(ratio(1, 2))
            && rep.passed(),
        || {
            format!(
                "worked example gave {} <= {}",
                level.exceed_mass, level.bound
            )
        },
    )?;
    ensure(
        expectation(&u, &proc, 2).unwrap() == ExtendedRational::one(),
        || "E(r_2) != 1".into(),
    )?;
    Ok(format!(
        "50 pairs, {doob_runs} Doob runs, worked example 1/4 <= 1/2"
    ))
}

fn pow(base: Rational, k: usize) -> Rational {
    (0..k).fold(int(1), |a, _| a * &base)
}

/// Running ratios for uniform against bernoulli(1/3).
fn classification() -> Outcome {
    let p = Measure::uniform();
    let q = Measure::bernoulli(ratio(1, 3)).unwrap();
    let alternating = Bitstring::from_bits((0..12).map(|i| i % 2 == 1).collect());
    let rep = classify(&p, &q, &alternating, &ratio(1, 2)).map_err(|e| e.to_string())?;
    for k in 0..=6 {
        let want = ExtendedRational::Finite(pow(ratio(8, 9), k));
        ensure(rep.running_min[2 * k] == want, || {
            format!(
                "alternating: min after {} bits is {}",
                2 * k,
                rep.running_min[2 * k]
            )
        })?;
    }
    let zeros = Bitstring::repeat(false, 12);
    let rep = classify(&p, &q, &zeros, &ratio(1, 2)).map_err(|e| e.to_string())?;
    for n in 0..=12 {
        let want = ExtendedRational::Finite(pow(ratio(4, 3), n));
        ensure(rep.ratios[n] == want, || {
            format!("zeros: ratio after {n} bits is {}", rep.ratios[n])
        })?;
    }
    Ok("(8/9)^k on 0101..., (4/3)^n on 0^n, n <= 12".into())
}

/// 100 seeded decomposition trials at leaf depth 5.
fn lemma_suite() -> Outcome {
    let start = Instant::now();
    for seed in 0..100 {
        let t = lemma_a_trial(&mut rng(1000 + seed));
        let eps = t.epsilon.clone();
        let inst =
            build_lemma_a_family(t.w, t.epsilon, t.joint, None).map_err(|e| e.to_string())?;
        let rep = verify_lemma_a(&inst, &t.y_prefix, 5).map_err(|e| e.to_string())?;
        ensure(rep.passed(), || {
            format!(
                "seed {seed}: {:?}",
                rep.checks.iter().filter(|c| !c.pass).collect::<Vec<_>>()
            )
        })?;
        ensure(rep.checks.iter().all(|c| c.note.is_none()), || {
            format!("seed {seed}: vacuous check")
        })?;
        let f = compute_f_epsilon(&inst, &eps).map_err(|e| e.to_string())?;
        ensure(f.tail_masses[f.index - 1] < eps, || {
            format!("seed {seed}: tail not below epsilon")
        })?;
    }
    within(start.elapsed(), Duration::from_secs(60))?;
    Ok(format!("100 trials in {:.1?}", start.elapsed()))
}

/// 25 seeded expansion instances, every inequality in the chain exact.
fn expansion_suite() -> Outcome {
    let mut violations = 0;
    for seed in 0..25 {
        let inst = random_expansion_instance(&mut rng(2000 + seed), 4);
        let rep = thmain_expand(&inst, 4).map_err(|e| e.to_string())?;
        violations += rep.checks.iter().filter(|c| !c.pass).count();
        ensure(rep.checks.len() >= 6, || {
            format!("seed {seed}: chain incomplete")
        })?;
    }
    ensure(violations == 0, || format!("{violations} violations"))?;
    Ok("25 instances, 0 violations".into())
}

/// Documented subcommands on the bundled fixtures.
pub const FIXTURE_RUNS: &[&[&str]] = &[
    &[
        "measure",
        "check",
        "--measure",
        "uniform.json",
        "--depth",
        "10",
    ],
    &[
        "measure",
        "eval",
        "--measure",
        "bernoulli13.json",
        "--x",
        "101",
    ],
    &[
        "conditional",
        "trace",
        "--joint",
        "example.json",
        "--x",
        "00",
        "--y",
        "111",
    ],
    &[
        "example",
        "build",
        "--epsilon",
        "1/2",
        "--machines",
        "trig1.json",
        "--depth",
        "3",
    ],
    &[
        "example",
        "verify",
        "--epsilon",
        "1/2",
        "--machines",
        "trig1.json",
        "--depth",
        "8",
    ],
    &[
        "example",
        "deviation",
        "--epsilon",
        "1/2",
        "--machines",
        "trig1.json",
        "--n",
        "1",
        "--y",
        "11",
    ],
    &[
        "martingale",
        "submartingale",
        "--p",
        "uniform.json",
        "--q",
        "zeros.json",
        "--depth",
        "8",
    ],
    &[
        "martingale",
        "doob",
        "--p",
        "uniform.json",
        "--q",
        "zeros.json",
        "--depth",
        "2",
        "--thresholds",
        "2",
    ],
    &[
        "martingale",
        "approx",
        "--p",
        "uniform.json",
        "--process",
        "process.json",
        "--scheme",
        "scheme.json",
        "--depth",
        "4",
    ],
    &[
        "martingale",
        "boundedprob",
        "--p",
        "uniform.json",
        "--q",
        "bernoulli13.json",
        "--depth",
        "8",
        "--ks",
        "1,2,4,8",
    ],
    &[
        "martingale",
        "classify",
        "--p",
        "uniform.json",
        "--q",
        "bernoulli13.json",
        "--x",
        "010101010101",
    ],
    &[
        "martingale",
        "equiv",
        "--joint",
        "--p",
        "uniform.json",
        "--q",
        "example.json",
        "--c",
        "1/2",
        "--c-hi",
        "3/2",
        "--depth",
        "4",
    ],
    &[
        "test",
        "blind",
        "--measure",
        "uniform.json",
        "--family",
        "family.json",
    ],
    &[
        "test",
        "solovay",
        "--measure",
        "bernoulli13.json",
        "--family",
        "family_explicit.json",
        "--horizon",
        "3",
    ],
    &[
        "test",
        "lemma-a",
        "--joint",
        "uniform.json",
        "--rects",
        "rects.json",
        "--epsilon",
        "3/4",
        "--y-prefix",
        "1",
        "--depth",
        "2",
    ],
    &[
        "test",
        "f-epsilon",
        "--joint",
        "uniform.json",
        "--rects",
        "rects.json",
        "--epsilon",
        "3/4",
        "--query",
        "1",
    ],
    &[
        "test",
        "expand",
        "--joint",
        "uniform.json",
        "--test",
        "relativized.json",
        "--y-prefix",
        "1",
        "--epsilon",
        "3/4",
    ],
    &[
        "test",
        "thmain-probe",
        "--p",
        "example.json",
        "--q",
        "uniform.json",
        "--x",
        "00",
        "--y",
        "11",
        "--f-y",
        "f_y.json",
    ],
    &[
        "test",
        "thmain-expand",
        "--instance",
        "expansion.json",
        "--depth",
        "4",
    ],
];

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn run_cli(args: &[&str]) -> Result<serde_json::Value, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_randlab"))
        .args(args)
        .current_dir(fixtures())
        .env_remove("RANDLAB_MAX_DEPTH")
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.code() == Some(0), || {
        format!(
            "`{}` exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr).trim()
        )
    })?;
    let mut v: serde_json::Value =
        serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
    v.as_object_mut().expect("envelope").remove("timing_ms");
    Ok(v)
}

fn cli_determinism() -> Outcome {
    for args in FIXTURE_RUNS {
        let a = run_cli(args)?;
        let b = run_cli(args)?;
        let (sa, sb) = (a.to_string(), b.to_string());
        ensure(sa == sb, || {
            format!("`{}` differs between runs", args.join(" "))
        })?;
        ensure(a["pass"] == true, || {
            format!("`{}` reported failure", args.join(" "))
        })?;
    }
    Ok(format!(
        "{} subcommand runs, byte-identical twice",
        FIXTURE_RUNS.len()
    ))
}

fn main() {
    let criteria: [Criterion; 7] = [
        ("consistency suite", consistency_suite),
        ("example invariants", example_invariants),
        ("martingale suite", martingale_suite),
        ("classification diagnostic", classification),
        ("decomposition suite", lemma_suite),
        ("expansion chain", expansion_suite),
        ("cli determinism", cli_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS criterion {}: {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {why}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
