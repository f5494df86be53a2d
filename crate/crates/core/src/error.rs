use thiserror::Error;

/// Errors raised by the numeric kernels and the design algorithms built on them.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not symmetric (asymmetry {asymmetry:.3e}, scale {scale:.3e})")]
    NotSymmetric { asymmetry: f64, scale: f64 },

    #[error("matrix contains a non-finite entry")]
    NonFinite,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("QR iteration exceeded its iteration cap")]
    ConvergenceFailure,

    #[error("Sylvester/Lyapunov operator is singular (eigenvalue condition violated)")]
    SingularSylvester,

    #[error("matrix is ill-conditioned (condition estimate {cond:.3e})")]
    IllConditioned { cond: f64 },

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    #[error("no positive approximation exists with the dominant data fixed: {0}")]
    InfeasibleEvenAfterRelaxation(String),

    #[error("(A, B) is not controllable (controllability rank {rank} < {n})")]
    Uncontrollable { rank: usize, n: usize },

    #[error("model reduction failed: {0}")]
    MorFailed(String),

    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
