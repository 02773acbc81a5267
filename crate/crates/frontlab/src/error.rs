use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("grid cannot resolve the interface: {0}")]
    Resolution(String),

    #[error("shape mismatch: expected {expected} nodes, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("degenerate parameters: {0}")]
    Degenerate(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("square root argument {0} lies on the branch cut")]
    BranchCut(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("singular matrix at pivot {0}")]
    Singular(usize),

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("trajectory diverged at t = {t} (|c| = {value:.3e})")]
    Divergence { t: f64, value: f64 },

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("{0}")]
    Io(String),
}

impl Error {
    /// Process exit code: 2 for bad input, 3 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParams(_)
            | Error::Resolution(_)
            | Error::Shape { .. }
            | Error::Degenerate(_)
            | Error::Unsupported(_)
            | Error::BranchCut(_)
            | Error::Precondition(_)
            | Error::Config { .. } => 2,
            Error::Io(_) => 1,
            _ => 3,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
