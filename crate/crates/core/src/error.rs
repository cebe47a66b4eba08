use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("invalid changepoints: {0}")]
    InvalidChangepoints(String),

    /// The hinge design matrix is numerically rank deficient.
    #[error("degenerate fit: design matrix has {cols} columns but numerical rank {rank}")]
    DegenerateFit { rank: usize, cols: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty input: {0}")]
    Empty(String),
}
