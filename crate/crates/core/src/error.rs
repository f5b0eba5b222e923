use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("box id {0} is already present")]
    DuplicateId(u32),

    #[error("box id {0} not found")]
    BoxNotFound(u32),

    #[error("arithmetic overflow: {0}")]
    Overflow(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("layout positions are unavailable; run the engine in layout mode")]
    NoPositions,

    #[error("monitor not ready: {0}")]
    NotReady(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
