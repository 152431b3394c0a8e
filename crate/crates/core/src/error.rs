use std::path::PathBuf;

/// Errors produced by the sampler library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric positive definite (pivot {index}: {value:e})")]
    NotSpd { index: usize, value: f64 },

    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps (off-diagonal residual {residual:e})")]
    EigenNoConvergence { sweeps: usize, residual: f64 },

    #[error("MAP search did not converge after {iterations} iterations (|grad|_inf = {grad_norm:e})")]
    MapNoConvergence { iterations: usize, grad_norm: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("(ε={eps}, κ={kappa}) is outside the stable region")]
    Unstable { eps: f64, kappa: f64 },

    #[error("series is constant; autocorrelation time is undefined")]
    ConstantSeries,

    #[error("series too short for autocorrelation analysis: {len} < {min}")]
    SeriesTooShort { len: usize, min: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("no tested step size reached acceptance {target}; sweep: {sweep}")]
    ProtocolSearch { target: f64, sweep: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

pub(crate) fn check_finite(v: &[f64], what: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}
