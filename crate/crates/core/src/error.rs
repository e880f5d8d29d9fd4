use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("cannot lay out {n_aps} APs on a {rows}x{cols} grid")]
    InvalidLayout { n_aps: usize, rows: usize, cols: usize },

    #[error("AP and user positions coincide; distance must be positive")]
    DegenerateGeometry,

    #[error("dimension mismatch in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("backward requires a scalar root, got {rows}x{cols}")]
    NonScalarRoot { rows: usize, cols: usize },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("negative channel gain at user {user}, AP {ap}")]
    NegativeGain { user: usize, ap: usize },

    #[error("assignment entry out of [0, 1] at ({row}, {col}): {value}")]
    OutOfRange { row: usize, col: usize, value: f64 },

    #[error("multiplier update for {requested} while training is in phase {actual}")]
    PhaseMismatch { requested: &'static str, actual: &'static str },

    #[error("infeasible constraints: {n_users} users x L={min_serving} exceeds {n_aps} APs x U={max_served}")]
    Infeasible {
        n_users: usize,
        n_aps: usize,
        min_serving: usize,
        max_served: usize,
    },

    #[error("parameter {name} is missing or has the wrong shape")]
    Parameter { name: String },

    #[error("{path}: schema error at line {line}: {msg}")]
    Schema { path: PathBuf, line: usize, msg: String },

    #[error("{path}: unsupported schema version {found} (expected {expected})")]
    Version { path: PathBuf, found: u32, expected: u32 },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn dim(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension { op, detail: detail.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
