use thiserror::Error;

/// Errors raised by the numerical kernels, solvers and dataset tools.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },

    #[error("dimension mismatch for {what}: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        what: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("matrix is not Hurwitz (spectral abscissa {abscissa:e})")]
    NotHurwitz { abscissa: f64 },

    #[error("Lyapunov operator is numerically singular (condition estimate {condition:e})")]
    SingularSystem { condition: f64 },

    #[error("eigenvalue iteration did not converge")]
    EigenFailure,

    #[error("Riccati iteration failed to produce a stabilizing solution")]
    NoStabilizingSolution,

    #[error("gain is not stabilizing (closed-loop spectral abscissa {abscissa:e})")]
    NotStabilizing { abscissa: f64 },

    #[error("initial gain is not stabilizing (closed-loop spectral abscissa {abscissa:e})")]
    InitNotStabilizing { abscissa: f64 },

    #[error("block partition {rows}x{cols} does not match a {m}x{n} gain")]
    PartitionMismatch {
        rows: usize,
        cols: usize,
        m: usize,
        n: usize,
    },

    #[error("invalid ball radius: {0}")]
    BadRadius(&'static str),

    #[error("operation requires a weighted regularizer")]
    WrongKind,

    #[error("invalid weights: {0}")]
    InvalidWeights(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),

    #[error("no stabilizing point inside the sparsity ball was found")]
    FeasibilityNotFound,

    #[error("inner solve failed: {0}")]
    InnerSolveFailed(&'static str),

    #[error("backtracking exhausted without a stabilizing step")]
    BacktrackExhausted,

    #[error("dataset generation rejected too many draws ({draws} draws for {count} examples)")]
    TooManyRejections { draws: usize, count: usize },

    #[error("reference gain {index} has zero norm")]
    ZeroReference { index: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
