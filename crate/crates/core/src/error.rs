use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes of the identification pipeline.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("state overflow at step {step}: |x_i| exceeded 1e300")]
    Overflow { step: usize },

    #[error("linear system is numerically singular (1-norm condition estimate {estimate:.3e} > {limit:.1e}); for geometrically growing trajectories, enable growth rescaling")]
    IllConditioned { estimate: f64, limit: f64 },

    #[error("linear system is singular: {0}")]
    SingularSystem(String),

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("trajectory has inputs; use the controlled-system estimator")]
    UnexpectedInputs,

    #[error("trajectory has no inputs; use the autonomous estimator or provide an input sequence")]
    MissingInputs,

    #[error("growth factor is undefined: every state in the trajectory has zero norm")]
    UndefinedSigma,

    #[error("degenerate hold-out split: {0}")]
    DegenerateSplit(String),

    #[error("every regularization candidate failed: {0}")]
    AllCandidatesFailed(String),

    #[error("eigenvalue iteration did not converge within {max_sweeps} sweeps")]
    EigNonConvergence { max_sweeps: usize },

    #[error("Riccati iteration did not converge within {max_iter} iterations (last step size {last_delta:.3e}); the pair may not be stabilizable")]
    DareNonConvergence { max_iter: usize, last_delta: f64 },

    #[error("trajectory parse error at line {line}: {message}")]
    TrajectoryParse { line: usize, message: String },
}
