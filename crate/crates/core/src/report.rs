//! Per-inequality check records shared by all verifiers.

use serde::Serialize;

use crate::rational::ExtendedRational;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "subset")]
    Subset,
    #[serde(rename = "disjoint")]
    Disjoint,
    #[serde(rename = "holds")]
    Holds,
}

impl Relation {
    pub fn eval<T: Ord>(self, lhs: &T, rhs: &T) -> bool {
        match self {
            Relation::Lt => lhs < rhs,
            Relation::Le => lhs <= rhs,
            Relation::Eq => lhs == rhs,
            Relation::Ge => lhs >= rhs,
            Relation::Gt => lhs > rhs,
            Relation::Subset | Relation::Disjoint | Relation::Holds => {
                panic!("set relations are evaluated by the caller")
            }
        }
    }
}

/// One checked relation `lhs ⋈ rhs` with exact values.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub lhs: String,
    pub rhs: String,
    pub relation: Relation,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    /// Compares two extended rationals.
    pub fn compare(
        name: impl Into<String>,
        lhs: &ExtendedRational,
        relation: Relation,
        rhs: &ExtendedRational,
    ) -> Self {
        Self {
            name: name.into(),
            lhs: lhs.to_string(),
            rhs: rhs.to_string(),
            relation,
            pass: relation.eval(lhs, rhs),
            note: None,
        }
    }

    /// A relation decided by the caller (set inclusion, disjointness, ...).
    pub fn decided(
        name: impl Into<String>,
        lhs: impl Into<String>,
        relation: Relation,
        rhs: impl Into<String>,
        pass: bool,
    ) -> Self {
        Self {
            name: name.into(),
            lhs: lhs.into(),
            rhs: rhs.into(),
            relation,
            pass,
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// Anything that carries a list of checks. Passing means every check passes.
pub trait Verdict {
    fn checks(&self) -> &[Check];

    fn passed(&self) -> bool {
        self.checks().iter().all(|c| c.pass)
    }

    fn failures(&self) -> Vec<&Check> {
        self.checks().iter().filter(|c| !c.pass).collect()
    }
}
