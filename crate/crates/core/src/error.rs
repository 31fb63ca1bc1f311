use thiserror::Error;

use crate::rma::RmaError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("invalid mesh: {0}")]
    Mesh(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("time {t} outside [0, {t_final}]")]
    TimeOutOfRange { t: f64, t_final: f64 },

    #[error("index {index} out of range (length {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("multistep method rejected: {0}")]
    UnstableMethod(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("point {point} relaxed twice in iteration {iteration}")]
    RelaxConflict { point: usize, iteration: usize },

    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("dimension {dim} exceeds cap {cap}")]
    TooLarge { dim: usize, cap: usize },

    #[error("configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Rma(#[from] RmaError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
