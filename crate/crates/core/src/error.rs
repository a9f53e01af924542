use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong inside the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue:e} below clipping threshold")]
    NotPsd { eigenvalue: f64 },

    #[error("matrix is not positive definite: minimum eigenvalue {min_eigenvalue:e}")]
    NotPd { min_eigenvalue: f64 },

    #[error("matrix is singular: minimum eigenvalue {min_eigenvalue:e}")]
    Singular { min_eigenvalue: f64 },

    #[error("eigendecomposition did not converge")]
    EigenFailed,

    #[error("ground-node reduction failed: minimum eigenvalue {min_eigenvalue:e} (graph disconnected?)")]
    ReductionFailed { min_eigenvalue: f64 },

    #[error("near-singular scenario: smallest |eigenvalue| {min_abs_eigenvalue:e} below 1e-6")]
    NearSingularScenario { min_abs_eigenvalue: f64 },

    #[error("plugin undefined for n ≤ p (n = {n}, p = {p})")]
    PluginUndefined { n: usize, p: usize },

    #[error("solver diverged at iteration {iteration}")]
    SolverDiverged { iteration: usize },

    #[error("dimension {p} exceeds the limit of {max} for this operation")]
    SizeLimit { p: usize, max: usize },

    #[error("missing section `{0}`")]
    MissingSection(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: branch references unknown bus {bus}")]
    UnknownBus { line: usize, bus: i64 },

    #[error("invalid branch {from}-{to}: {reason}")]
    InvalidBranch { from: i64, to: i64, reason: String },

    #[error("in-service network is disconnected: {} components {components:?}", components.len())]
    Disconnected { components: Vec<Vec<i64>> },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }

    /// Broad class of the failure, used by front ends to pick exit codes.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidInput(_)
            | Error::InvalidParameter { .. }
            | Error::MissingSection(_)
            | Error::Parse { .. }
            | Error::UnknownBus { .. }
            | Error::InvalidBranch { .. }
            | Error::Disconnected { .. }
            | Error::SizeLimit { .. } => ErrorKind::Validation,
            Error::Io(_) => ErrorKind::Io,
            _ => ErrorKind::Numerical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numerical,
    Io,
}
