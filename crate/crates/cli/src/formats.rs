//! Input file formats and a loader that hashes everything it reads.
//!
//! Every place that takes a measure accepts a path, an inline JSON object, or
//! the bare word `uniform`. Paths nested inside a file resolve relative to
//! that file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use randlab_core::testlab::{
    ExpansionInstance, LevelBound, PartialBound, RelativizedTest, TestFamily,
};
use randlab_core::{
    build_example, parse_rational, ApproximationScheme, Bitstring, ExampleParams, ExtendedRational,
    GFunction, GValue, JointMeasure, MachineTable, Measure, PrefixSet, RatioProcess, Rational,
    RectSet, TableMeasure,
};

/// A measure given inline or by reference.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum MeasureRef {
    Path(String),
    Spec(MeasureSpec),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSpec {
    Uniform,
    Bernoulli {
        p: String,
    },
    Table {
        depth: usize,
        leaves: BTreeMap<String, String>,
    },
    Product {
        x: Box<MeasureRef>,
        y: Box<MeasureRef>,
    },
    Example {
        epsilon: String,
        machines: MachinesRef,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum MachinesRef {
    Path(String),
    Inline(MachineFile),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum MachineFile {
    Triggers {
        machine_count: usize,
        triggers: Vec<TriggerEntry>,
    },
    Entries {
        machine_count: Option<usize>,
        entries: Vec<HaltEntry>,
    },
}

#[derive(Clone, Debug, Deserialize)]
pub struct TriggerEntry {
    pub n: usize,
    pub prefix: Bitstring,
}

#[derive(Clone, Debug, Deserialize)]
pub struct HaltEntry {
    pub n: usize,
    pub y: Bitstring,
    pub halted: bool,
}

/// Either two measures whose likelihood ratio is the process, or explicit
/// values per node.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum ProcessFile {
    Ratio {
        p: MeasureRef,
        q: MeasureRef,
    },
    Values {
        values: BTreeMap<Bitstring, ExtendedRational>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum GSpec {
    Tag(String),
    Table { table: BTreeMap<String, String> },
}

#[derive(Debug, Deserialize)]
pub struct FEntry {
    pub x: Bitstring,
    pub n: usize,
    pub value: String,
}

#[derive(Debug, Deserialize)]
pub struct SchemeFile {
    pub g: GSpec,
    pub c: u64,
    #[serde(default)]
    pub f: Vec<FEntry>,
    pub default: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum BoundSpec {
    Tag(String),
    Explicit(Vec<String>),
}

#[derive(Debug, Deserialize)]
pub struct FamilyFile {
    pub levels: Vec<PrefixSet>,
    pub bound: Option<BoundSpec>,
}

#[derive(Debug, Deserialize)]
pub struct ExpansionFile {
    pub p: MeasureRef,
    pub q: MeasureRef,
    #[serde(default)]
    pub y: Bitstring,
    pub u: PrefixSet,
    pub f_y: PartialBound,
    pub c1: String,
    pub c2: String,
    pub level: usize,
}

fn rational(s: &str, field: &str) -> Result<Rational> {
    parse_rational(s).with_context(|| format!("field `{field}`"))
}

/// Reads inputs and keeps the SHA-256 of each, keyed by how it was named.
#[derive(Debug, Default)]
pub struct Loader {
    inputs: BTreeMap<String, String>,
}

impl Loader {
    pub fn inputs(&self) -> &BTreeMap<String, String> {
        &self.inputs
    }

    fn record(&mut self, key: String, text: &str) {
        self.inputs
            .insert(key, hex::encode(Sha256::digest(text.as_bytes())));
    }

    fn read(&mut self, path: &Path) -> Result<String> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        self.record(path.display().to_string(), &text);
        Ok(text)
    }

    /// Parses a JSON file, naming the file in any error.
    pub fn json<T: DeserializeOwned>(&mut self, path: &Path) -> Result<T> {
        let text = self.read(path)?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// The text of an argument that is either a path or inline JSON.
    fn arg_json<T: DeserializeOwned>(&mut self, arg: &str, base: &Path) -> Result<(T, PathBuf)> {
        if arg.trim_start().starts_with('{') {
            self.record(format!("inline:{arg}"), arg);
            let v = serde_json::from_str(arg).context("parsing inline JSON")?;
            return Ok((v, base.to_path_buf()));
        }
        let path = base.join(arg);
        let v = self.json(&path)?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((v, dir))
    }

    fn resolve(&mut self, r: &MeasureRef, base: &Path) -> Result<(MeasureSpec, PathBuf)> {
        match r {
            MeasureRef::Path(p) if p == "uniform" && !base.join(p).exists() => {
                Ok((MeasureSpec::Uniform, base.to_path_buf()))
            }
            MeasureRef::Path(p) => self.arg_json(p, base),
            MeasureRef::Spec(s) => Ok((s.clone(), base.to_path_buf())),
        }
    }

    fn resolve_arg(&mut self, arg: &str) -> Result<(MeasureSpec, PathBuf)> {
        self.resolve(&MeasureRef::Path(arg.to_string()), Path::new(""))
    }

    /// A measure on `Ω`.
    pub fn measure(&mut self, arg: &str) -> Result<Measure> {
        let (spec, _) = self.resolve_arg(arg)?;
        self.single(&spec)
            .with_context(|| format!("measure `{arg}`"))
    }

    /// A measure on `Ω²`; `uniform` is the uniform product.
    pub fn joint(&mut self, arg: &str) -> Result<JointMeasure> {
        let (spec, base) = self.resolve_arg(arg)?;
        self.joint_spec(&spec, &base)
            .with_context(|| format!("joint measure `{arg}`"))
    }

    fn single(&mut self, spec: &MeasureSpec) -> Result<Measure> {
        Ok(match spec {
            MeasureSpec::Uniform => Measure::uniform(),
            MeasureSpec::Bernoulli { p } => Measure::bernoulli(rational(p, "p")?)?,
            MeasureSpec::Table { depth, leaves } => Measure::table(table(*depth, leaves)?),
            MeasureSpec::Product { .. } | MeasureSpec::Example { .. } => {
                bail!("a joint measure was given where a measure on one coordinate is expected")
            }
        })
    }

    fn single_ref(&mut self, r: &MeasureRef, base: &Path) -> Result<Measure> {
        let (spec, _) = self.resolve(r, base)?;
        self.single(&spec)
    }

    fn joint_spec(&mut self, spec: &MeasureSpec, base: &Path) -> Result<JointMeasure> {
        Ok(match spec {
            MeasureSpec::Uniform => JointMeasure::uniform_product(),
            MeasureSpec::Product { x, y } => {
                JointMeasure::product(self.single_ref(x, base)?, self.single_ref(y, base)?)
            }
            MeasureSpec::Example { epsilon, machines } => {
                let table = self.machines(machines, base)?;
                build_example(ExampleParams::new(rational(epsilon, "epsilon")?, table))?
            }
            MeasureSpec::Bernoulli { .. } | MeasureSpec::Table { .. } => {
                bail!("a measure on one coordinate was given where a joint measure is expected")
            }
        })
    }

    fn joint_ref(&mut self, r: &MeasureRef, base: &Path) -> Result<JointMeasure> {
        let (spec, base) = self.resolve(r, base)?;
        self.joint_spec(&spec, &base)
    }

    pub fn machines(&mut self, r: &MachinesRef, base: &Path) -> Result<MachineTable> {
        let file = match r {
            MachinesRef::Inline(f) => return machine_table(f),
            MachinesRef::Path(p) => {
                let path = base.join(p);
                self.json::<MachineFile>(&path)?
            }
        };
        machine_table(&file)
    }

    /// An example measure from `--epsilon` and a machine file.
    pub fn example(&mut self, epsilon: &Rational, machines: &Path) -> Result<JointMeasure> {
        let file: MachineFile = self.json(machines)?;
        let table = machine_table(&file)
            .with_context(|| format!("machine table {}", machines.display()))?;
        Ok(build_example(ExampleParams::new(epsilon.clone(), table))?)
    }

    pub fn process(&mut self, path: &Path) -> Result<RatioProcess> {
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        match self.json::<ProcessFile>(path)? {
            ProcessFile::Ratio { p, q } => {
                let p = self.single_ref(&p, &dir)?;
                let q = self.single_ref(&q, &dir)?;
                Ok(RatioProcess::likelihood(p, q))
            }
            ProcessFile::Values { values } => Ok(RatioProcess::table(values)),
        }
    }

    pub fn scheme(&mut self, path: &Path) -> Result<ApproximationScheme> {
        let file: SchemeFile = self.json(path)?;
        let g = match &file.g {
            GSpec::Tag(t) if t == "dyadic-log" => GFunction::DyadicLog,
            GSpec::Tag(t) => bail!("{}: unknown g tag `{t}`", path.display()),
            GSpec::Table { table } => GFunction::Table(
                table
                    .iter()
                    .map(|(k, v)| Ok((rational(k, "g.table")?, rational(v, "g.table")?)))
                    .collect::<Result<_>>()?,
            ),
        };
        let gv = |s: &str| -> Result<GValue> { Ok(s.parse::<GValue>()?) };
        let f = file
            .f
            .iter()
            .map(|e| Ok(((e.x.clone(), e.n), gv(&e.value)?)))
            .collect::<Result<BTreeMap<_, _>>>()
            .with_context(|| format!("{}: field `f`", path.display()))?;
        let default = file.default.as_deref().map(gv).transpose()?;
        Ok(ApproximationScheme::from_table(g, f, default, file.c))
    }

    pub fn family(&mut self, path: &Path) -> Result<TestFamily> {
        let file: FamilyFile = self.json(path)?;
        let bound = match file.bound {
            None => LevelBound::Geometric,
            Some(BoundSpec::Tag(t)) if t == "2^-n" => LevelBound::Geometric,
            Some(BoundSpec::Tag(t)) => bail!("{}: unknown bound `{t}`", path.display()),
            Some(BoundSpec::Explicit(v)) => LevelBound::Explicit(
                v.iter()
                    .map(|s| rational(s, "bound"))
                    .collect::<Result<_>>()?,
            ),
        };
        Ok(TestFamily::new(file.levels).with_bound(bound))
    }

    pub fn relativized(&mut self, path: &Path) -> Result<RelativizedTest> {
        self.json(path)
    }

    pub fn rects(&mut self, path: &Path) -> Result<RectSet> {
        self.json(path)
    }

    pub fn partial_bound(&mut self, path: &Path) -> Result<PartialBound> {
        self.json(path)
    }

    pub fn expansion(&mut self, path: &Path) -> Result<ExpansionInstance> {
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let f: ExpansionFile = self.json(path)?;
        Ok(ExpansionInstance {
            p: self.joint_ref(&f.p, &dir)?,
            q: self.joint_ref(&f.q, &dir)?,
            y: f.y,
            u: f.u,
            f_y: f.f_y,
            c1: rational(&f.c1, "c1")?,
            c2: rational(&f.c2, "c2")?,
            level: f.level,
        })
    }
}

fn machine_table(f: &MachineFile) -> Result<MachineTable> {
    Ok(match f {
        MachineFile::Triggers {
            machine_count,
            triggers,
        } => MachineTable::from_triggers(
            *machine_count,
            triggers.iter().map(|t| (t.n, t.prefix.clone())),
        )?,
        MachineFile::Entries {
            machine_count,
            entries,
        } => {
            let count =
                machine_count.unwrap_or_else(|| entries.iter().map(|e| e.n).max().unwrap_or(0));
            MachineTable::from_entries(count, entries.iter().map(|e| (e.n, e.y.clone(), e.halted)))?
        }
    })
}

fn table(depth: usize, leaves: &BTreeMap<String, String>) -> Result<TableMeasure> {
    if depth > 24 {
        bail!("table depth {depth} too large");
    }
    let mut values = vec![Rational::from_integer(0.into()); 1 << depth];
    for (k, v) in leaves {
        let w: Bitstring = k.parse().with_context(|| format!("leaf key `{k}`"))?;
        if w.len() != depth {
            bail!(
                "leaf `{k}` has length {} but the table depth is {depth}",
                w.len()
            );
        }
        values[w.index() as usize] = rational(v, "leaves")?;
    }
    Ok(TableMeasure::from_leaves(depth, values)?)
}
