use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("block structure mismatch: {0}")]
    StructureMismatch(String),

    /// The pair `c_±` violates `C_{-(α-1)} C_{+(α-1)} = C_{+α} C_{-α}`.
    #[error("c_- and c_+ do not commute (residual {residual:.3e} at block {alpha})")]
    CommutatorViolation { alpha: usize, residual: f64 },

    #[error("C_{sign}{alpha} is not of maximum rank (rank {rank}, expected {expected})")]
    RankDeficient {
        sign: char,
        alpha: usize,
        rank: usize,
        expected: usize,
    },

    #[error("spectral construction failed: {0}")]
    SpectralConstruction(String),

    #[error("null-sector initial data is not supported by the closed-form evolution; use the matrix-exponential oracle")]
    UnsupportedNullSector,

    #[error("pole collision: {0}")]
    PoleCollision(String),

    /// The solution has a genuine pole at the requested point.
    #[error("solution is singular: {0}")]
    SolutionSingularity(String),

    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),

    #[error("no regular grid points: every point was singular")]
    EmptyReport,
}
