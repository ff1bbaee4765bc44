use thiserror::Error;

use crate::matops::MatError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix: {0}")]
    Matrix(#[from] MatError),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("augmented system not controllable (rank {rank} < {required})")]
    Uncontrollable { rank: usize, required: usize },
    #[error("no equilibrium: {0}")]
    NoEquilibrium(String),
    #[error("no setpoint step on the {axis} axis at t = {time} s")]
    NoStep { axis: &'static str, time: f64 },
    #[error("response diverged inside the metrics window")]
    DivergedWindow,
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
