use alloc::string::String;

/// Errors raised by the coverage, estimation and scheduling routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("grid must have at least one row and one column (got {rows}x{cols})")]
    EmptyGrid { rows: usize, cols: usize },

    #[error("graph must contain at least one vertex")]
    EmptyGraph,

    #[error("edge ({u}, {v}) references a vertex outside 0..{count}")]
    EdgeOutOfRange { u: usize, v: usize, count: usize },

    #[error("edge ({u}, {v}) has non-positive or non-finite weight {weight}")]
    BadEdgeWeight { u: usize, v: usize, weight: f64 },

    #[error("graph is disconnected: vertex {to} is unreachable from vertex {from}")]
    Disconnected { from: usize, to: usize },

    #[error("vertex {vertex} out of range for {count} vertices")]
    VertexOutOfRange { vertex: usize, count: usize },

    #[error("robot {robot} out of range for {count} robots")]
    RobotOutOfRange { robot: usize, count: usize },

    #[error("{what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("task {task} has an empty kernel list")]
    EmptyKernels { task: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{which} is not symmetric positive semidefinite")]
    NotPsd { which: &'static str },

    #[error("numerically singular matrix in {context}")]
    Singular { context: &'static str },

    #[error("uncertainty threshold {threshold} not reached after {max_points} sampling points")]
    BatchLimit { threshold: f64, max_points: usize },

    #[error("cumulative regret is non-positive at step {step}; log-log slope undefined")]
    NonPositiveCumulative { step: usize },

    #[error("trace too short for slope estimation ({len} points in window)")]
    ShortTrace { len: usize },
}

pub type Result<T> = core::result::Result<T, Error>;
