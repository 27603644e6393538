//! Probability measures on the binary tree `Ω` and the product tree `Ω²`,
//! evaluated exactly on cylinders.

mod consistency;
pub mod grid;
mod prefix;
mod table;

use std::sync::Arc;

use num_traits::{One, Zero};
use serde::Serialize;

use crate::bits::Bitstring;
use crate::error::{LabError, Result};
use crate::example::ExampleMeasure;
use crate::rational::{half_pow, Rational};

pub use consistency::{
    check_consistency, check_joint_consistency, ConsistencyReport, Identity, Violation,
};
pub use prefix::{
    nonoverlapping_cover, prefix_set_measure, rect_set_measure, PrefixSet, Rect, RectSet,
};
pub use table::{JointTable, TableMeasure};

/// Depth cap given to measures that are defined at every depth.
pub const DEFAULT_DEPTH_CAP: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureKind {
    Uniform,
    Bernoulli,
    Table,
    Derived,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum JointKind {
    Product,
    Table,
    Example,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

#[derive(Clone, Debug)]
enum Source {
    Uniform,
    /// Independent bits with `P(bit = 1) = one`.
    Bernoulli {
        one: Rational,
        zero: Rational,
    },
    Table(Arc<TableMeasure>),
    Marginal {
        joint: Arc<JointMeasure>,
        axis: Axis,
    },
    Conditional {
        joint: Arc<JointMeasure>,
        y: Bitstring,
        norm: Rational,
    },
}

/// A probability measure on `Ω`, given by its values on cylinders.
#[derive(Clone, Debug)]
pub struct Measure {
    source: Source,
    depth_cap: usize,
}

impl Measure {
    pub fn uniform() -> Self {
        Self {
            source: Source::Uniform,
            depth_cap: DEFAULT_DEPTH_CAP,
        }
    }

    /// I.i.d. bits with `P(1) = p`; `p = 0` is the point mass on `0^∞`.
    pub fn bernoulli(p: Rational) -> Result<Self> {
        if p < Rational::zero() || p > Rational::one() {
            return Err(LabError::InvalidMeasure(format!(
                "bernoulli parameter {p} outside [0,1]"
            )));
        }
        Ok(Self {
            source: Source::Bernoulli {
                zero: Rational::one() - &p,
                one: p,
            },
            depth_cap: DEFAULT_DEPTH_CAP,
        })
    }

    pub fn table(table: TableMeasure) -> Self {
        Self {
            source: Source::Table(Arc::new(table)),
            depth_cap: DEFAULT_DEPTH_CAP,
        }
    }

    pub fn with_depth_cap(mut self, cap: usize) -> Self {
        self.depth_cap = cap;
        self
    }

    pub fn depth_cap(&self) -> usize {
        self.depth_cap
    }

    pub fn kind(&self) -> MeasureKind {
        match self.source {
            Source::Uniform => MeasureKind::Uniform,
            Source::Bernoulli { .. } => MeasureKind::Bernoulli,
            Source::Table(_) => MeasureKind::Table,
            Source::Marginal { .. } | Source::Conditional { .. } => MeasureKind::Derived,
        }
    }

    pub fn as_table(&self) -> Option<&TableMeasure> {
        match &self.source {
            Source::Table(t) => Some(t),
            _ => None,
        }
    }

    /// `P(Δ(x))`.
    pub fn eval(&self, x: &Bitstring) -> Result<Rational> {
        if x.len() > self.depth_cap {
            return Err(LabError::DepthExceeded {
                len: x.len(),
                cap: self.depth_cap,
            });
        }
        Ok(match &self.source {
            Source::Uniform => half_pow(x.len()),
            Source::Bernoulli { one, zero } => {
                let ones = x.bits().iter().filter(|&&b| b).count();
                num_traits::pow(one.clone(), ones) * num_traits::pow(zero.clone(), x.len() - ones)
            }
            Source::Table(t) => t.eval(x),
            Source::Marginal { joint, axis } => match axis {
                Axis::X => joint.eval(x, &Bitstring::empty())?,
                Axis::Y => joint.eval(&Bitstring::empty(), x)?,
            },
            Source::Conditional { joint, y, norm } => joint.eval(x, y)? / norm,
        })
    }
}

#[derive(Clone, Debug)]
enum JointSource {
    Product(Measure, Measure),
    Table(Arc<JointTable>),
    Example(Arc<ExampleMeasure>),
}

/// A probability measure on `Ω²`, evaluated on rectangles `Δ(x) × Δ(y)`.
#[derive(Clone, Debug)]
pub struct JointMeasure {
    source: JointSource,
    x_cap: usize,
    y_cap: usize,
}

impl JointMeasure {
    pub fn product(x: Measure, y: Measure) -> Self {
        let (x_cap, y_cap) = (x.depth_cap(), y.depth_cap());
        Self {
            source: JointSource::Product(x, y),
            x_cap,
            y_cap,
        }
    }

    pub fn uniform_product() -> Self {
        Self::product(Measure::uniform(), Measure::uniform())
    }

    pub fn table(table: JointTable) -> Self {
        Self {
            source: JointSource::Table(Arc::new(table)),
            x_cap: DEFAULT_DEPTH_CAP,
            y_cap: DEFAULT_DEPTH_CAP,
        }
    }

    pub fn example(example: ExampleMeasure) -> Self {
        let (x_cap, y_cap) = example.depth_caps();
        Self {
            source: JointSource::Example(Arc::new(example)),
            x_cap,
            y_cap,
        }
    }

    pub fn with_depth_caps(mut self, x_cap: usize, y_cap: usize) -> Self {
        self.x_cap = x_cap;
        self.y_cap = y_cap;
        self
    }

    pub fn depth_caps(&self) -> (usize, usize) {
        (self.x_cap, self.y_cap)
    }

    pub fn kind(&self) -> JointKind {
        match self.source {
            JointSource::Product(..) => JointKind::Product,
            JointSource::Table(_) => JointKind::Table,
            JointSource::Example(_) => JointKind::Example,
        }
    }

    pub fn as_example(&self) -> Option<&ExampleMeasure> {
        match &self.source {
            JointSource::Example(e) => Some(e),
            _ => None,
        }
    }

    /// `P(Δ(x) × Δ(y))`.
    pub fn eval(&self, x: &Bitstring, y: &Bitstring) -> Result<Rational> {
        if x.len() > self.x_cap {
            return Err(LabError::DepthExceeded {
                len: x.len(),
                cap: self.x_cap,
            });
        }
        if y.len() > self.y_cap {
            return Err(LabError::DepthExceeded {
                len: y.len(),
                cap: self.y_cap,
            });
        }
        match &self.source {
            JointSource::Product(mx, my) => Ok(mx.eval(x)? * my.eval(y)?),
            JointSource::Table(t) => Ok(t.eval(x, y)),
            JointSource::Example(e) => e.eval(x, y),
        }
    }

    /// `x ↦ P(x, y)` over `xs`.
    pub fn row(&self, y: &Bitstring, xs: &[Bitstring]) -> Result<Vec<Rational>> {
        match &self.source {
            JointSource::Example(e) => {
                if let Some(long) = xs.iter().find(|x| x.len() > self.x_cap) {
                    return Err(LabError::DepthExceeded {
                        len: long.len(),
                        cap: self.x_cap,
                    });
                }
                e.row(y, xs)
            }
            _ => xs.iter().map(|x| self.eval(x, y)).collect(),
        }
    }

    /// `(P_X, P_Y)` with `P_X(x) = P(x, λ)` and `P_Y(y) = P(λ, y)`.
    pub fn marginals(&self) -> (Measure, Measure) {
        if let JointSource::Product(mx, my) = &self.source {
            return (mx.clone(), my.clone());
        }
        let joint = Arc::new(self.clone());
        let derive = |axis, depth_cap| Measure {
            source: Source::Marginal {
                joint: joint.clone(),
                axis,
            },
            depth_cap,
        };
        (derive(Axis::X, self.x_cap), derive(Axis::Y, self.y_cap))
    }

    pub fn marginal_y(&self, y: &Bitstring) -> Result<Rational> {
        self.eval(&Bitstring::empty(), y)
    }

    /// `P(x | y) = P(x, y) / P_Y(y)`.
    pub fn conditional(&self, x: &Bitstring, y: &Bitstring) -> Result<Rational> {
        let py = self.marginal_y(y)?;
        if py.is_zero() {
            return Err(LabError::ZeroCondition { y: y.clone() });
        }
        Ok(self.eval(x, y)? / py)
    }

    /// `[P(x | y)]` for `y` running over every prefix of `y_stream`, starting at `λ`.
    pub fn conditional_trace(&self, x: &Bitstring, y_stream: &Bitstring) -> Result<Vec<Rational>> {
        y_stream
            .prefixes()
            .map(|y| self.conditional(x, &y))
            .collect()
    }

    /// The measure `P(· | y)` on `Ω`.
    pub fn conditional_measure(&self, y: &Bitstring) -> Result<Measure> {
        let norm = self.marginal_y(y)?;
        if norm.is_zero() {
            return Err(LabError::ZeroCondition { y: y.clone() });
        }
        Ok(Measure {
            source: Source::Conditional {
                joint: Arc::new(self.clone()),
                y: y.clone(),
                norm,
            },
            depth_cap: self.x_cap,
        })
    }
}
