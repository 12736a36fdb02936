use thiserror::Error;

/// Errors raised anywhere in the precoding pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A channel or generator matrix does not have the required rank.
    #[error("matrix is rank deficient (numerical rank {rank} < {required})")]
    RankDeficient { rank: usize, required: usize },

    /// The lattice generator has a (near) zero triangular diagonal entry.
    #[error("lattice generator is singular (diagonal entry {index} has magnitude {magnitude:e})")]
    SingularGenerator { index: usize, magnitude: f64 },

    #[error("projection basis vector {index} has norm {norm:e}")]
    DegenerateBasis { index: usize, norm: f64 },

    /// The brute-force minimiser sits on the boundary of the search box, so the
    /// box may not contain the true closest point.
    #[error("brute-force minimiser touches the search box boundary (radius {radius})")]
    BoxTooSmall { radius: i64 },

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("exhaustive search over {users} users exceeds the limit of {limit}")]
    TooManyUsers { users: usize, limit: usize },

    #[error("rate allocation switched off every user")]
    NoActiveUsers,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid matrix entry: {0}")]
    NonFinite(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
