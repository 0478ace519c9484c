use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field length {found} does not match grid size {expected}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("non-finite value at index {index} in {what}")]
    NonFinite { what: &'static str, index: usize },

    #[error("operands live on different grids")]
    GridMismatch,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("axis {axis} out of range for a {dim}-dimensional grid")]
    AxisOutOfRange { axis: usize, dim: usize },

    #[error("theta tensor is not antisymmetric at ({row}, {col})")]
    NotAntisymmetric { row: usize, col: usize },

    #[error("invalid frequency: {0}")]
    InvalidFrequency(String),

    #[error("cannot parse frequency literal {literal:?}: {reason}")]
    FrequencyParse { literal: String, reason: String },

    #[error("exact arithmetic overflow in {0}")]
    Overflow(&'static str),

    #[error("commensurability of {0} and {1} is undecidable in quadratic-field arithmetic")]
    Undecidable(String, String),

    #[error("frequency {0} is rational; use it directly instead of approximants")]
    RationalFrequency(String),

    #[error("box length {length} on axis {axis} is not a multiple of {period}")]
    IncommensurateBox {
        axis: usize,
        length: f64,
        period: f64,
    },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("envelope cutoff {cutoff} is not below the Bragg wavenumber {bragg}")]
    ScalesNotSeparated { cutoff: f64, bragg: f64 },

    #[error("integration produced non-finite values; last good time {last_good_time}")]
    Diverged { last_good_time: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
