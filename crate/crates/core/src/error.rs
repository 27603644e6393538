use thiserror::Error;

use crate::bits::Bitstring;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("depth exceeded: length {len} is beyond the depth cap {cap}")]
    DepthExceeded { len: usize, cap: usize },

    #[error("conditioning on a null cylinder: P_Y({y:?}) = 0")]
    ZeroCondition { y: Bitstring },

    #[error("conditioning on a null partition atom containing {y:?}")]
    NullAtom { y: Bitstring },

    #[error("machine table is not monotone: machine {machine} halted at {halted:?} but not at extension {extension:?}")]
    NonMonotoneTable {
        machine: usize,
        halted: Bitstring,
        extension: Bitstring,
    },

    #[error("epsilon {0} must lie strictly between 0 and 1")]
    EpsilonOutOfRange(String),

    #[error("process takes the negative value {value} at {at:?}")]
    NegativeValue { at: Bitstring, value: String },

    #[error("g is not strictly increasing: g({a}) = {ga} but g({b}) = {gb}")]
    GNotMonotone {
        a: String,
        ga: String,
        b: String,
        gb: String,
    },

    #[error("g is not defined at {0}")]
    GUndefined(String),

    #[error("no valid index: query {0} admits no tail bound")]
    NoValidIndex(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, LabError>;
