use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field has no axis extension rule (role `{0}`)")]
    UndefinedAxisExtension(String),

    #[error("unknown field role `{0}`")]
    UnknownRole(String),

    #[error("field shape mismatch: expected {expected} values, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("field contains non-finite value at node ({i}, {j})")]
    NonFinite { i: usize, j: usize },

    #[error("invalid exponent: {0}")]
    InvalidExponent(String),

    #[error("wrong field role: expected {expected}, got {actual}")]
    WrongRole { expected: &'static str, actual: String },

    #[error("invalid quadrature: {0}")]
    InvalidQuadrature(String),

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    #[error("config line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    #[error("initial data violates the support margin: {0}")]
    SupportMargin(String),

    #[error("velocity is not finite")]
    NonFiniteVelocity,

    #[error("snapshot {path}: {message}")]
    Snapshot { path: PathBuf, message: String },

    #[error("csv: {0}")]
    Csv(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
