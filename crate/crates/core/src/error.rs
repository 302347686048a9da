//! Crate-wide error type.

use alloc::string::String;
use core::fmt;

/// Errors raised by graph construction, numerics, training, and kernels.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Edge endpoint outside `0..n`.
    InvalidEdge { u: usize, v: usize, n: usize },
    /// Explicit self-loop in an edge list; self-loops are synthesized by
    /// transition-matrix construction, never stored.
    SelfLoopRejected { node: usize },
    /// Operand shapes do not line up.
    DimensionError {
        context: &'static str,
        expected: (usize, usize),
        got: (usize, usize),
    },
    /// A node id appears in more than one split part.
    SplitOverlap { node: usize },
    /// Symmetric factorization hit a non-positive pivot.
    FactorizationError { pivot: usize },
    /// Loss requested over an empty node mask.
    EmptyMask,
    /// Placement needs a graph but none was supplied.
    MissingGraph,
    /// Model name outside the supported vocabulary.
    UnknownModel { name: String },
    /// A node to be scored has no label.
    MissingLabels { node: usize },
    /// A probe prediction became non-finite at scale `t`.
    NumericalOverflow { t: f64 },
    /// Zero feature vector where a direction is required.
    DegenerateFeature { node: usize },
    /// Stratified split left a class without training nodes.
    StratificationError { class: usize },
    /// Argument outside its documented range.
    InvalidArgument(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidEdge { u, v, n } => {
                write!(f, "edge ({u},{v}) out of range for {n} nodes")
            }
            Error::SelfLoopRejected { node } => {
                write!(
                    f,
                    "self-loop on node {node} rejected; self-loops are scheme-level"
                )
            }
            Error::DimensionError {
                context,
                expected,
                got,
            } => write!(
                f,
                "{context}: expected {}x{}, got {}x{}",
                expected.0, expected.1, got.0, got.1
            ),
            Error::SplitOverlap { node } => write!(f, "node {node} appears in two split parts"),
            Error::FactorizationError { pivot } => {
                write!(f, "matrix not positive definite at pivot {pivot}")
            }
            Error::EmptyMask => write!(f, "empty node mask"),
            Error::MissingGraph => write!(f, "message passing requested without a graph"),
            Error::UnknownModel { name } => write!(f, "unknown model name `{name}`"),
            Error::MissingLabels { node } => write!(f, "node {node} has no label"),
            Error::NumericalOverflow { t } => {
                write!(f, "non-finite prediction at scale t={t}")
            }
            Error::DegenerateFeature { node } => {
                write!(f, "zero feature vector on node {node}")
            }
            Error::StratificationError { class } => {
                write!(
                    f,
                    "class {class} has no training nodes after stratification"
                )
            }
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
