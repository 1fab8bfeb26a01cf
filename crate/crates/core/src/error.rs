use thiserror::Error;

/// Errors raised by the shell library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShellError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate parametrization at node ({i}, {j}): |r1 x r2| = {norm:e}")]
    DegenerateChart { i: usize, j: usize, norm: f64 },

    #[error("grid mismatch: expected {expected} nodes, got {got}")]
    GridMismatch { expected: usize, got: usize },

    #[error("metric is not positive definite at node {node}")]
    NonSpdMetric { node: usize },

    #[error("operation requires a {expected} chart, got {got}")]
    WrongFamily { expected: &'static str, got: String },

    #[error("matrix is not a rotation: |QᵀQ - I| = {orthogonality:e}, det = {det}")]
    NotARotation { orthogonality: f64, det: f64 },

    #[error("thickness too large for the tubular neighborhood: max |t h Π| = {max_curv_h}")]
    ThicknessTooLarge { max_curv_h: f64 },

    #[error("linear solve failed: {0}")]
    Singular(String),

    #[error("eigen solver failed: {0}")]
    Eigen(String),

    #[error("empty basis: {0}")]
    EmptyBasis(String),

    #[error("line search exhausted without decrease at iteration {iteration} (value {value:e})")]
    LineSearch { iteration: usize, value: f64 },
}

pub type Result<T> = std::result::Result<T, ShellError>;
