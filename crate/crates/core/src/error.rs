use thiserror::Error;

/// Coarse classification used by callers to map failures onto exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Contract,
    NonConvergence,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("singularity: {0}")]
    Singularity(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("non-finite value {value} at node {node}")]
    NonFinite { node: usize, value: f64 },
    #[error("guarded point: {0}")]
    GuardedPoint(String),
    #[error("indeterminate zero order: slope {slope:.4}")]
    IndeterminateOrder { slope: f64 },
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("zero on sampling circle r={r}; retry with a different radius")]
    ZeroOnCircle { r: f64 },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        what: String,
        iterations: usize,
        residual: f64,
    },
    #[error("solver inconsistency: {0}")]
    SolverInconsistency(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::NonConvergence { .. } | Error::SolverInconsistency(_) => {
                ErrorClass::NonConvergence
            }
            _ => ErrorClass::Contract,
        }
    }

    /// Short stable tag for machine-readable diagnostics.
    pub fn tag(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Degenerate(_) => "degenerate",
            Error::Singularity(_) => "singularity",
            Error::Parameter(_) => "parameter",
            Error::NonFinite { .. } => "non-finite",
            Error::GuardedPoint(_) => "guarded-point",
            Error::IndeterminateOrder { .. } => "indeterminate-order",
            Error::Configuration(_) => "configuration",
            Error::ZeroOnCircle { .. } => "zero-on-circle",
            Error::Contract(_) => "contract",
            Error::NonConvergence { .. } => "non-convergence",
            Error::SolverInconsistency(_) => "solver-inconsistency",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
