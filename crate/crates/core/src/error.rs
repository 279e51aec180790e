use std::path::PathBuf;

/// Errors raised by the measure, kernel, dynamics and energy routines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid reference profile: {0}")]
    InvalidProfile(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: expected {expected} grid points, got {found}")]
    Shape { expected: usize, found: usize },

    #[error("state is not monotone: x[{index}] = {left} > x[{next}] = {right}", next = index + 1)]
    NonMonotone { index: usize, left: f64, right: f64 },

    #[error("non-finite value at grid index {index}")]
    NonFinite { index: usize },

    #[error("second derivative of |x|^{q} is singular at x = 0")]
    Singularity { q: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no steady state exists for q_a = q_r = 1 with mass {mass} < 1; mass escapes to infinity")]
    NoSteadyState { mass: f64 },

    #[error("exponents out of range: q_a and q_r must lie in [1, 2] with q_r <= q_a, got q_a = {q_a}, q_r = {q_r}")]
    Exponents { q_a: f64, q_r: f64 },

    #[error("time step {dt} violates dt * lambda <= {safety} (lambda = {lambda}); use dt <= {suggested}")]
    StepGuard {
        dt: f64,
        lambda: f64,
        safety: f64,
        suggested: f64,
    },

    #[error(
        "order lost at t = {t} (x[{index}] > x[{next}]); the step dt = {dt} is too large \
         for this grid, try dt <= {suggested}",
        next = index + 1
    )]
    StepAborted {
        t: f64,
        dt: f64,
        index: usize,
        suggested: f64,
    },

    #[error("subdifferential is set-valued: particles {i} and {j} coincide with q_r = 1")]
    Subdifferential { i: usize, j: usize },

    #[error("{0}")]
    Input(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
