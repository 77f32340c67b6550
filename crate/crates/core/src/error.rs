use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// The gain does not exceed the bound `A`, so no finite sliding time
    /// can be certified.
    #[error("sliding condition violated: rho = {rho} must exceed A = {a}")]
    ConditionViolated { rho: f64, a: f64 },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("Newton iteration failed to converge at t = {t} after {retries} step reductions")]
    NewtonFailure { t: f64, retries: usize },

    #[error("inner solver failed during outer iteration {iteration}: {source}")]
    InnerSolver {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("non-finite value in field `{field}` at outer iteration {iteration}")]
    NonFinite { field: String, iteration: usize },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("unknown preset `{0}` (available: fig1, fig2, fig3, fig4, fig5, fig6)")]
    UnknownPreset(String),

    #[error("malformed field file: {0}")]
    FieldFormat(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
