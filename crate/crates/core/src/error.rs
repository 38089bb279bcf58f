//! Error type shared by all core operations.

use alloc::string::String;

/// Errors produced by model evaluation, differentiation and analysis.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CoreError {
    /// An input vector does not match the model's dimensions.
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// An input or computed quantity is NaN or infinite.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// A parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Differentiation was requested at a point with tied objective values,
    /// where the selection ranking is ambiguous.
    #[error("differentiation refused: tied objective values at the evaluation point")]
    TiedRanking,

    /// A rank-condition witness lies outside the control set.
    #[error("invalid witness: extended density {density:e} is not above threshold {threshold:e}")]
    InvalidWitness { density: f64, threshold: f64 },

    /// The singular value iteration did not converge.
    #[error("SVD did not converge after {0} sweeps")]
    SvdNonConvergence(usize),

    /// A simulated chain left the finite domain.
    #[error("non-finite state at step {index}")]
    NonFiniteState { index: usize },

    /// Evidence pieces passed to verdict assembly refer to different candidate states.
    #[error("candidate mismatch: {0}")]
    CandidateMismatch(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = core::result::Result<T, CoreError>;
