use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Operand shapes are incompatible for `op`.
    Shape {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    /// A softmax row had no finite entry after masking.
    DegenerateRow {
        row: usize,
    },
    /// A graph target vertex without incoming edges.
    DegenerateNeighborhood {
        vertex: usize,
    },
    /// Moments requested for a (near) constant sample.
    DegenerateDistribution {
        variance: f64,
    },
    TooFewValues {
        needed: usize,
        got: usize,
    },
    NonScalarLoss {
        rows: usize,
        cols: usize,
    },
    EmptyVertexSet,
    /// A block pattern row without any allowed column block.
    EmptyRowGroup {
        row: usize,
    },
    InvalidConfig(String),
    /// A flop meter was reused across passes without a reset.
    Accounting(String),
    /// Measured and predicted counts disagree on the listed phases.
    Reconciliation {
        phases: Vec<String>,
    },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape { op, lhs, rhs } => {
                write!(f, "shape mismatch in {op}: {}x{} vs {}x{}", lhs.0, lhs.1, rhs.0, rhs.1)
            }
            Error::DegenerateRow { row } => write!(f, "row {row} is fully masked"),
            Error::DegenerateNeighborhood { vertex } => {
                write!(f, "target vertex {vertex} has no incoming edges")
            }
            Error::DegenerateDistribution { variance } => {
                write!(f, "degenerate distribution (variance {variance:e})")
            }
            Error::TooFewValues { needed, got } => {
                write!(f, "need at least {needed} values, got {got}")
            }
            Error::NonScalarLoss { rows, cols } => {
                write!(f, "loss must be 1x1, got {rows}x{cols}")
            }
            Error::EmptyVertexSet => f.write_str("vertex set is empty"),
            Error::EmptyRowGroup { row } => {
                write!(f, "pattern row {row} allows no column block")
            }
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::Accounting(msg) => write!(f, "accounting error: {msg}"),
            Error::Reconciliation { phases } => {
                write!(f, "reconciliation failed for phases: {}", phases.join(", "))
            }
        }
    }
}

impl core::error::Error for Error {}
