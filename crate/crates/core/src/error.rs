use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the geometry and solver layers.
///
/// Every variant falls in one of three families (precondition, non-convergence, I/O)
/// which the command line maps to its exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("non-manifold edge ({a}, {b}) bordered by {count} triangles")]
    NonManifoldEdge { a: usize, b: usize, count: usize },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("genus < 2 (genus {genus}): a hyperbolic metric does not exist")]
    GenusTooSmall { genus: i64 },

    #[error("fields live on different surfaces")]
    SurfaceMismatch,

    #[error("field length {got} does not match vertex count {expected}")]
    FieldLength { expected: usize, got: usize },

    #[error("inadmissible data: {0}")]
    Inadmissible(String),

    #[error("solvability condition violated: mean(rhs) = {mean:e} exceeds {allowed:e}")]
    SolvabilityViolated { mean: f64, allowed: f64 },

    #[error("balance hypothesis fails: required bal >= {required}, actual {actual}")]
    BalanceHypothesis { required: f64, actual: f64 },

    #[error("target volume {target} not bracketed: achieved range [{lo}, {hi}]")]
    NotBracketed { target: f64, lo: f64, hi: f64 },

    #[error("hypothesis of the fixed-point criterion fails (lhs {lhs} < rhs {rhs}); pass an override to run anyway")]
    HypothesisFails { lhs: f64, rhs: f64 },

    #[error("{what} did not converge after {iterations} iterations (last residual {residual:e})")]
    NotConverged {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("{0}")]
    Precondition(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Precondition,
    NonConvergence,
    Io,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::NotConverged { .. } | Error::NotBracketed { .. } => ErrorKind::NonConvergence,
            Error::Io(_) | Error::Json(_) | Error::Parse { .. } => ErrorKind::Io,
            _ => ErrorKind::Precondition,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            ErrorKind::Precondition => 1,
            ErrorKind::NonConvergence => 2,
            ErrorKind::Io => 3,
        }
    }
}
