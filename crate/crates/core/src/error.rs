use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite value {value} at sample {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("expected {expected} samples, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("functions live on different grids")]
    GridMismatch,

    #[error("cannot normalize a function with zero norm")]
    ZeroNorm,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{potential} has no bound state at level {level} (bound levels: {bound})")]
    NoSuchBoundState {
        potential: String,
        level: usize,
        bound: String,
    },

    #[error("lowering operator annihilates the lowest state of {0}")]
    GroundStateAnnihilated(String),

    #[error(
        "C = {c} makes the denominator vanish; forbidden interval is \
         [{forbidden_lo}, {forbidden_hi}] (normalized)"
    )]
    SingularC {
        c: f64,
        forbidden_lo: f64,
        forbidden_hi: f64,
    },

    #[error("level {0} is the missing state of this deformation; use missing_state")]
    UseMissingState(usize),

    #[error("C scale is not defined for {0}")]
    ScaleUnavailable(String),

    #[error("chain step {index} failed: {source}")]
    ChainStep {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("eigensolver did not converge: {0}")]
    NoConvergence(String),
}
