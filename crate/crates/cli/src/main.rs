//! `randlab`: exact verification reports for measures, martingales and
//! randomness tests on the binary tree.
//!
//! Reports go to stdout (or `--out`) as one JSON document; diagnostics go to
//! stderr. Exit status is 0 when every check passes, 1 when one fails and 2
//! on usage, parse or precondition errors.

mod formats;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use randlab_core::example::{conditional_deviation, marked_half};
use randlab_core::sample::{lemma_a_trial, random_expansion_instance, rng};
use randlab_core::testlab::SECTION_READING;
use randlab_core::{
    build_lemma_a_family, check_bounded_in_probability, check_consistency,
    check_effective_approximation, check_joint_consistency, check_submartingale, classify,
    compute_f_epsilon, doob_check, equivalence_certificate, expand_via_lemma_a, format_rational,
    joint_equivalence_certificate, parse_rational, thmain_expand, thmain_probe, verify_blind_test,
    verify_example_invariants, verify_lemma_a, verify_ratio_bounds, verify_solovay, Bitstring,
    Check, ProbBoundCertificate, RatioProcess, Rational, Verdict,
};

use formats::Loader;

#[derive(Parser, Debug)]
#[command(name = "randlab", version, about, propagate_version = true)]
struct Cli {
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Largest depth any command may enumerate.
    #[arg(long, global = true, env = "RANDLAB_MAX_DEPTH", default_value_t = 16)]
    max_depth: usize,

    #[command(subcommand)]
    group: Group,
}

#[derive(Subcommand, Debug)]
enum Group {
    /// Measures on one coordinate.
    #[command(subcommand)]
    Measure(MeasureCmd),
    /// Conditionals of a joint measure.
    #[command(subcommand)]
    Conditional(ConditionalCmd),
    /// The machine-table example construction.
    #[command(subcommand)]
    Example(ExampleCmd),
    /// Likelihood-ratio processes.
    #[command(subcommand)]
    Martingale(MartingaleCmd),
    /// Test families.
    #[command(subcommand)]
    Test(TestCmd),
}

fn rat(s: &str) -> std::result::Result<Rational, String> {
    parse_rational(s).map_err(|e| e.to_string())
}

fn bits(s: &str) -> std::result::Result<Bitstring, String> {
    s.parse::<Bitstring>().map_err(|e| e.to_string())
}

#[derive(Subcommand, Debug)]
enum MeasureCmd {
    /// Normalisation, non-negativity and additivity up to a depth.
    Check {
        #[arg(long)]
        measure: String,
        #[arg(long)]
        depth: usize,
        /// Read the measure as a joint measure on pairs.
        #[arg(long)]
        joint: bool,
    },
    /// `P(x)`, or `P(x, y)` when `--y` is given.
    Eval {
        #[arg(long)]
        measure: String,
        #[arg(long, value_parser = bits)]
        x: Bitstring,
        #[arg(long, value_parser = bits)]
        y: Option<Bitstring>,
    },
}

#[derive(Subcommand, Debug)]
enum ConditionalCmd {
    /// `P(x | y[..i])` for every prefix of `y`.
    Trace {
        #[arg(long)]
        joint: String,
        #[arg(long, value_parser = bits)]
        x: Bitstring,
        #[arg(long, value_parser = bits)]
        y: Bitstring,
    },
}

#[derive(Args, Debug)]
struct ExampleArgs {
    #[arg(long, value_parser = rat)]
    epsilon: Rational,
    /// Machine table file.
    #[arg(long)]
    machines: PathBuf,
}

#[derive(Subcommand, Debug)]
enum ExampleCmd {
    /// Build the measure and tabulate the marked halves of each cell.
    Build {
        #[command(flatten)]
        ex: ExampleArgs,
        #[arg(long, default_value_t = 4)]
        depth: usize,
    },
    /// Ratio bounds against the uniform product plus the structural invariants.
    Verify {
        #[command(flatten)]
        ex: ExampleArgs,
        #[arg(long)]
        depth: usize,
    },
    /// Whether machine `n`'s marked half moves away from its prior along `y`.
    Deviation {
        #[command(flatten)]
        ex: ExampleArgs,
        #[arg(long)]
        n: usize,
        #[arg(long, value_parser = bits)]
        y: Bitstring,
    },
}

#[derive(Args, Debug)]
struct PairArgs {
    /// Reference measure.
    #[arg(long)]
    p: String,
    /// Alternative measure.
    #[arg(long)]
    q: Option<String>,
    /// Process file; replaces the ratio `Q/P`.
    #[arg(long)]
    process: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum MartingaleCmd {
    /// The submartingale inequality at every non-null node.
    Submartingale {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long)]
        depth: usize,
    },
    /// Doob's maximal inequality at each threshold.
    Doob {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long)]
        depth: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        thresholds: Vec<u64>,
        /// Approximation scheme for the chain through the approximating sets.
        #[arg(long)]
        scheme: Option<PathBuf>,
    },
    /// The sandwich `f ≤ g(r) ≤ f + c` at every node.
    Approx {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long)]
        scheme: PathBuf,
        #[arg(long)]
        depth: usize,
    },
    /// Mass of `{P/Q > k}` against a decreasing certificate `h`.
    Boundedprob {
        #[arg(long)]
        p: String,
        #[arg(long)]
        q: String,
        #[arg(long)]
        depth: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        ks: Vec<u64>,
        /// `k=h` pairs; defaults to `h(k) = 1/k`.
        #[arg(long, value_delimiter = ',')]
        h: Vec<String>,
    },
    /// Running ratio, minimum and maximum along a word.
    Classify {
        #[arg(long)]
        p: String,
        #[arg(long)]
        q: String,
        #[arg(long, value_parser = bits)]
        x: Bitstring,
        #[arg(long, value_parser = rat, default_value = "1/2")]
        threshold: Rational,
    },
    /// `c ⋈ Q/P ⋈ c_hi` on every cylinder up to a depth.
    Equiv {
        #[arg(long)]
        p: String,
        #[arg(long)]
        q: String,
        #[arg(long, value_parser = rat)]
        c: Rational,
        #[arg(long, value_parser = rat)]
        c_hi: Rational,
        #[arg(long)]
        depth: usize,
        /// Strict inequalities.
        #[arg(long)]
        strict: bool,
        /// Compare joint measures on pairs.
        #[arg(long)]
        joint: bool,
    },
}

#[derive(Args, Debug)]
struct LemmaArgs {
    #[arg(long, required_unless_present = "seed")]
    joint: Option<String>,
    /// Rectangle list `[["x","y"], ...]`, pairwise disjoint.
    #[arg(long, required_unless_present = "seed")]
    rects: Option<PathBuf>,
    #[arg(long, value_parser = rat, required_unless_present = "seed")]
    epsilon: Option<Rational>,
    /// Oracle depth; defaults to the longest `y` in the list.
    #[arg(long)]
    y_depth: Option<usize>,
    /// Draw a random instance from this seed instead.
    #[arg(long, conflicts_with_all = ["joint", "rects", "epsilon"])]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum TestCmd {
    /// Nesting and level bounds of a test family.
    Blind {
        #[arg(long)]
        measure: String,
        #[arg(long)]
        family: PathBuf,
    },
    /// Partial sums of level masses against the family's majorant.
    Solovay {
        #[arg(long)]
        measure: String,
        #[arg(long)]
        family: PathBuf,
        #[arg(long)]
        horizon: usize,
    },
    /// Decomposition identities of the level family built from a rectangle list.
    LemmaA {
        #[command(flatten)]
        lemma: LemmaArgs,
        #[arg(long, value_parser = bits)]
        y_prefix: Option<Bitstring>,
        #[arg(long, default_value_t = 5)]
        depth: usize,
    },
    /// Least index whose tail of differences has mass below a query.
    FEpsilon {
        #[command(flatten)]
        lemma: LemmaArgs,
        #[arg(long, value_parser = rat)]
        query: Rational,
    },
    /// Expands a relativized test into a global one.
    Expand {
        #[arg(long)]
        joint: String,
        /// Relativized test file.
        #[arg(long)]
        test: PathBuf,
        #[arg(long, value_parser = bits)]
        y_prefix: Bitstring,
        #[arg(long, value_parser = rat)]
        epsilon: Rational,
        #[arg(long)]
        f_eps: Option<usize>,
    },
    /// Positivity, sandwich and running infimum along a word at an oracle prefix.
    ThmainProbe {
        #[arg(long)]
        p: String,
        #[arg(long)]
        q: String,
        #[arg(long, value_parser = bits)]
        x: Bitstring,
        #[arg(long, value_parser = bits)]
        y: Bitstring,
        /// Partial bound file `{"default": "2", "entries": {"0": "3/2"}}`.
        #[arg(long)]
        f_y: PathBuf,
    },
    /// The full conditional-to-joint expansion chain.
    ThmainExpand {
        #[arg(long, required_unless_present = "seed")]
        instance: Option<PathBuf>,
        /// Draw a random instance from this seed instead.
        #[arg(long, conflicts_with = "instance")]
        seed: Option<u64>,
        #[arg(long, default_value_t = 4)]
        depth: usize,
    },
}

/// What a command produced.
struct Outcome {
    report: Value,
    pass: bool,
}

impl Outcome {
    fn verdict<R: Serialize + Verdict>(r: &R) -> Result<Self> {
        Ok(Self {
            report: serde_json::to_value(r)?,
            pass: r.passed(),
        })
    }

    fn with(report: Value, pass: bool) -> Self {
        Self { report, pass }
    }
}

fn checks_value(checks: &[Check]) -> Result<Value> {
    Ok(serde_json::to_value(checks)?)
}

struct Ctx {
    loader: Loader,
    max_depth: usize,
}

impl Ctx {
    fn depth(&self, name: &str, d: usize) -> Result<usize> {
        if d == 0 {
            bail!("--{name} must be at least 1");
        }
        if d > self.max_depth {
            bail!(
                "--{name} {d} exceeds RANDLAB_MAX_DEPTH = {}",
                self.max_depth
            );
        }
        Ok(d)
    }

    fn word(&self, name: &str, w: &Bitstring) -> Result<()> {
        if w.len() > self.max_depth {
            bail!(
                "--{name} has {} bits, beyond RANDLAB_MAX_DEPTH = {}",
                w.len(),
                self.max_depth
            );
        }
        Ok(())
    }

    fn process(&mut self, pair: &PairArgs) -> Result<(randlab_core::Measure, RatioProcess)> {
        let p = self.loader.measure(&pair.p)?;
        let proc = match (&pair.q, &pair.process) {
            (_, Some(file)) => self.loader.process(file)?,
            (Some(q), None) => RatioProcess::likelihood(p.clone(), self.loader.measure(q)?),
            (None, None) => bail!("give --q or --process"),
        };
        Ok((p, proc))
    }

    fn lemma(
        &mut self,
        a: &LemmaArgs,
    ) -> Result<(randlab_core::LemmaAInstance, Option<Bitstring>)> {
        if let Some(seed) = a.seed {
            let t = lemma_a_trial(&mut rng(seed));
            let inst = build_lemma_a_family(t.w, t.epsilon, t.joint, a.y_depth)?;
            return Ok((inst, Some(t.y_prefix)));
        }
        let (Some(joint), Some(rects), Some(eps)) = (&a.joint, &a.rects, &a.epsilon) else {
            bail!("give --joint, --rects and --epsilon, or --seed");
        };
        let joint = self.loader.joint(joint)?;
        let w = self.loader.rects(rects)?;
        Ok((
            build_lemma_a_family(w, eps.clone(), joint, a.y_depth)?,
            None,
        ))
    }
}

fn run(group: &Group, ctx: &mut Ctx) -> Result<Outcome> {
    match group {
        Group::Measure(cmd) => measure(cmd, ctx),
        Group::Conditional(ConditionalCmd::Trace { joint, x, y }) => {
            ctx.word("x", x)?;
            ctx.word("y", y)?;
            let j = ctx.loader.joint(joint)?;
            let trace = j.conditional_trace(x, y)?;
            let rows: Vec<Value> = y
                .prefixes()
                .zip(&trace)
                .map(|(w, v)| json!({"y": w.to_string(), "value": format_rational(v)}))
                .collect();
            Ok(Outcome::with(
                json!({"x": x.to_string(), "y": y.to_string(), "trace": rows}),
                true,
            ))
        }
        Group::Example(cmd) => example(cmd, ctx),
        Group::Martingale(cmd) => martingale(cmd, ctx),
        Group::Test(cmd) => test(cmd, ctx),
    }
}

fn measure(cmd: &MeasureCmd, ctx: &mut Ctx) -> Result<Outcome> {
    match cmd {
        MeasureCmd::Check {
            measure,
            depth,
            joint,
        } => {
            let depth = ctx.depth("depth", *depth)?;
            let r = if *joint {
                check_joint_consistency(&ctx.loader.joint(measure)?, depth)?
            } else {
                check_consistency(&ctx.loader.measure(measure)?, depth)?
            };
            Outcome::verdict(&r)
        }
        MeasureCmd::Eval { measure, x, y } => {
            ctx.word("x", x)?;
            let (value, y) = match y {
                Some(y) => {
                    ctx.word("y", y)?;
                    (ctx.loader.joint(measure)?.eval(x, y)?, Some(y.to_string()))
                }
                None => (ctx.loader.measure(measure)?.eval(x)?, None),
            };
            Ok(Outcome::with(
                json!({"x": x.to_string(), "y": y, "value": format_rational(&value)}),
                true,
            ))
        }
    }
}

fn example(cmd: &ExampleCmd, ctx: &mut Ctx) -> Result<Outcome> {
    match cmd {
        ExampleCmd::Build { ex, depth } => {
            let depth = ctx.depth("depth", *depth)?;
            let p = ctx.loader.example(&ex.epsilon, &ex.machines)?;
            let e = p.as_example().expect("example measure");
            let table = e.table();
            let machines: Vec<Value> = (1..=table.machine_count())
                .map(|n| {
                    let cell = marked_half(n);
                    let values: Vec<Value> = randlab_core::Bitstring::all_up_to(depth)
                        .map(|y| {
                            Ok(json!({
                                "y": y.to_string(),
                                "conditional": format_rational(&p.conditional(&cell, &y)?),
                            }))
                        })
                        .collect::<Result<_>>()?;
                    Ok(json!({
                        "n": n,
                        "triggers": table.triggers(n).map(|t| t.to_string()).collect::<Vec<_>>(),
                        "marked_half": cell.to_string(),
                        "values": values,
                    }))
                })
                .collect::<Result<_>>()?;
            let consistency = check_joint_consistency(&p, depth)?;
            let pass = consistency.passed();
            Ok(Outcome::with(
                json!({
                    "epsilon": format_rational(&ex.epsilon),
                    "machine_count": table.machine_count(),
                    "machines": machines,
                    "consistency": consistency,
                    "checks": checks_value(consistency.checks())?,
                }),
                pass,
            ))
        }
        ExampleCmd::Verify { ex, depth } => {
            let depth = ctx.depth("depth", *depth)?;
            let p = ctx.loader.example(&ex.epsilon, &ex.machines)?;
            let bounds = verify_ratio_bounds(&p, &ex.epsilon, depth)?;
            let inv = verify_example_invariants(&p, depth.min(6))?;
            let pass = bounds.passed() && inv.passed();
            Ok(Outcome::with(
                json!({"ratio_bounds": bounds, "invariants": inv}),
                pass,
            ))
        }
        ExampleCmd::Deviation { ex, n, y } => {
            ctx.word("y", y)?;
            let p = ctx.loader.example(&ex.epsilon, &ex.machines)?;
            let d = conditional_deviation(&p, *n, y)?;
            let pass = d.deviates == d.trigger_fired;
            Ok(Outcome::with(serde_json::to_value(&d)?, pass))
        }
    }
}

fn martingale(cmd: &MartingaleCmd, ctx: &mut Ctx) -> Result<Outcome> {
    match cmd {
        MartingaleCmd::Submartingale { pair, depth } => {
            let depth = ctx.depth("depth", *depth)?;
            let (p, proc) = ctx.process(pair)?;
            Outcome::verdict(&check_submartingale(&p, &proc, depth)?)
        }
        MartingaleCmd::Doob {
            pair,
            depth,
            thresholds,
            scheme,
        } => {
            let depth = ctx.depth("depth", *depth)?;
            let (p, proc) = ctx.process(pair)?;
            let scheme = scheme.as_ref().map(|s| ctx.loader.scheme(s)).transpose()?;
            Outcome::verdict(&doob_check(&p, &proc, depth, thresholds, scheme.as_ref())?)
        }
        MartingaleCmd::Approx {
            pair,
            scheme,
            depth,
        } => {
            let depth = ctx.depth("depth", *depth)?;
            let (_, proc) = ctx.process(pair)?;
            let scheme = ctx.loader.scheme(scheme)?;
            Outcome::verdict(&check_effective_approximation(&proc, &scheme, depth)?)
        }
        MartingaleCmd::Boundedprob { p, q, depth, ks, h } => {
            let depth = ctx.depth("depth", *depth)?;
            let p = ctx.loader.measure(p)?;
            let q = ctx.loader.measure(q)?;
            let cert = if h.is_empty() {
                ProbBoundCertificate::reciprocal()
            } else {
                let table = h
                    .iter()
                    .map(|kv| {
                        let (k, v) = kv
                            .split_once('=')
                            .context("--h entries look like k=value")?;
                        Ok((k.trim().parse::<u64>()?, parse_rational(v)?))
                    })
                    .collect::<Result<_>>()?;
                ProbBoundCertificate::from_table(table)
            };
            Outcome::verdict(&check_bounded_in_probability(&p, &q, &cert, depth, ks)?)
        }
        MartingaleCmd::Classify { p, q, x, threshold } => {
            ctx.word("x", x)?;
            let p = ctx.loader.measure(p)?;
            let q = ctx.loader.measure(q)?;
            Outcome::verdict(&classify(&p, &q, x, threshold)?)
        }
        MartingaleCmd::Equiv {
            p,
            q,
            c,
            c_hi,
            depth,
            strict,
            joint,
        } => {
            let depth = ctx.depth("depth", *depth)?;
            let r = if *joint {
                let p = ctx.loader.joint(p)?;
                let q = ctx.loader.joint(q)?;
                joint_equivalence_certificate(&p, &q, c, c_hi, depth, *strict)?
            } else {
                let p = ctx.loader.measure(p)?;
                let q = ctx.loader.measure(q)?;
                equivalence_certificate(&p, &q, c, c_hi, depth, *strict)?
            };
            Outcome::verdict(&r)
        }
    }
}

fn test(cmd: &TestCmd, ctx: &mut Ctx) -> Result<Outcome> {
    match cmd {
        TestCmd::Blind { measure, family } => {
            let m = ctx.loader.measure(measure)?;
            let fam = ctx.loader.family(family)?;
            Outcome::verdict(&verify_blind_test(&m, &fam)?)
        }
        TestCmd::Solovay {
            measure,
            family,
            horizon,
        } => {
            let m = ctx.loader.measure(measure)?;
            let fam = ctx.loader.family(family)?;
            Outcome::verdict(&verify_solovay(&m, &fam, *horizon)?)
        }
        TestCmd::LemmaA {
            lemma,
            y_prefix,
            depth,
        } => {
            let depth = ctx.depth("depth", *depth)?;
            let (inst, drawn) = ctx.lemma(lemma)?;
            let y = match (y_prefix, drawn) {
                (Some(y), _) => y.clone(),
                (None, Some(y)) => y,
                (None, None) => bail!("give --y-prefix"),
            };
            ctx.word("y-prefix", &y)?;
            let rep = verify_lemma_a(&inst, &y, depth)?;
            let pass = rep.passed();
            Ok(Outcome::with(
                json!({"family": inst, "verification": rep}),
                pass,
            ))
        }
        TestCmd::FEpsilon { lemma, query } => {
            let (inst, _) = ctx.lemma(lemma)?;
            let f = compute_f_epsilon(&inst, query)?;
            let pass = f
                .tail_masses
                .get(f.index.saturating_sub(1))
                .is_none_or(|m| m < query);
            Ok(Outcome::with(
                json!({"reading": SECTION_READING, "query": format_rational(query), "f_epsilon": f}),
                pass,
            ))
        }
        TestCmd::Expand {
            joint,
            test,
            y_prefix,
            epsilon,
            f_eps,
        } => {
            ctx.word("y-prefix", y_prefix)?;
            let j = ctx.loader.joint(joint)?;
            let t = ctx.loader.relativized(test)?;
            Outcome::verdict(&expand_via_lemma_a(&t, &j, y_prefix, epsilon, *f_eps)?)
        }
        TestCmd::ThmainProbe { p, q, x, y, f_y } => {
            ctx.word("x", x)?;
            ctx.word("y", y)?;
            let p = ctx.loader.joint(p)?;
            let q = ctx.loader.joint(q)?;
            let f = ctx.loader.partial_bound(f_y)?;
            Outcome::verdict(&thmain_probe(&p, &q, x, y, &f)?)
        }
        TestCmd::ThmainExpand {
            instance,
            seed,
            depth,
        } => {
            let depth = ctx.depth("depth", *depth)?;
            let inst = match (instance, seed) {
                (Some(path), _) => ctx.loader.expansion(path)?,
                (None, Some(s)) => random_expansion_instance(&mut rng(*s), depth),
                (None, None) => bail!("give --instance or --seed"),
            };
            Outcome::verdict(&thmain_expand(&inst, depth)?)
        }
    }
}

fn command_name(g: &Group) -> String {
    let debug = format!("{g:?}");
    // "Measure(Check { .. })" -> "measure check"
    let mut parts = debug
        .split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .take(2)
        .map(kebab);
    format!(
        "{} {}",
        parts.next().unwrap_or_default(),
        parts.next().unwrap_or_default()
    )
}

fn kebab(s: &str) -> String {
    let mut out = String::new();
    for (i, c) in s.chars().enumerate() {
        if c.is_uppercase() && i > 0 {
            out.push('-');
        }
        out.extend(c.to_lowercase());
    }
    out
}

#[derive(Serialize)]
struct Envelope {
    command: String,
    argv: Vec<String>,
    inputs: BTreeMap<String, String>,
    pass: bool,
    report: Value,
    timing_ms: u128,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let command = command_name(&cli.group);
    let mut ctx = Ctx {
        loader: Loader::default(),
        max_depth: cli.max_depth,
    };
    let start = Instant::now();
    let outcome = match run(&cli.group, &mut ctx) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("randlab {command}: error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let envelope = Envelope {
        command: command.clone(),
        argv,
        inputs: ctx.loader.inputs().clone(),
        pass: outcome.pass,
        report: outcome.report,
        timing_ms: start.elapsed().as_millis(),
    };
    let text = match serde_json::to_string_pretty(&envelope) {
        Ok(t) => t + "\n",
        Err(e) => {
            eprintln!("randlab {command}: error: {e}");
            return ExitCode::from(2);
        }
    };
    match &cli.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &text) {
                eprintln!("randlab {command}: error: writing {}: {e}", path.display());
                return ExitCode::from(2);
            }
        }
        None => print!("{text}"),
    }
    eprintln!(
        "randlab {command}: {}",
        if envelope.pass { "pass" } else { "FAIL" }
    );
    if envelope.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
