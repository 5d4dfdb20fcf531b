use std::path::PathBuf;

/// Errors produced by the flow laboratory.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("field lives on a different grid")]
    GridMismatch,

    #[error("non-finite value {value} at node {node}")]
    NonFinite { node: usize, value: f64 },

    #[error("stencil at node {node} touches an exterior node")]
    StencilClosure { node: usize },

    #[error("complex Hessian not positive at node {node} (min eigenvalue {min_eig:e}, det {det:e})")]
    NotPositive { node: usize, min_eig: f64, det: f64 },

    #[error("boundary traces differ by {defect:e} (tolerance {tol:e})")]
    TraceMismatch { defect: f64, tol: f64 },

    #[error("linear solver stagnated after {iterations} iterations (relative residual {residual:e})")]
    SolverStagnation { iterations: usize, residual: f64 },

    #[error("Newton damping underflow at iteration {iteration} (merit {merit:e})")]
    DampingUnderflow { iteration: usize, merit: f64 },

    #[error("Newton did not converge in {iterations} iterations (residual {residual:e})")]
    NewtonNotConverged { iterations: usize, residual: f64 },

    #[error("time step {step} at t = {t} failed: {reason}")]
    StepFailure { step: usize, t: f64, reason: String },

    #[error("Lyapunov violation at trace row {row}: F rose by {rise:e} (tolerance {tol:e})")]
    LyapunovViolation { row: usize, rise: f64, tol: f64 },

    #[error("no steady state by t = {t} (sup |u_t| = {sup_udot:e})")]
    NotSteady { t: f64, sup_udot: f64 },

    #[error("subsolution check failed: {0}")]
    SubsolutionFailed(String),

    #[error("unknown closed-form tag {0:?}")]
    UnknownTag(String),

    #[error("refinement is not monotone at level {level}: integrand looks noisy")]
    NoisyIntegrand { level: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config: {0}")]
    Config(String),

    #[error("snapshot: {0}")]
    Snapshot(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Failure class, mapped onto process exit codes by the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Numerical,
    Invariant,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::Io { .. } | Error::Snapshot(_) | Error::InvalidDomain(_) => {
                ErrorClass::Config
            }
            Error::LyapunovViolation { .. } | Error::SubsolutionFailed(_) => ErrorClass::Invariant,
            _ => ErrorClass::Numerical,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
