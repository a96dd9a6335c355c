//! Error types shared across the library.

use thiserror::Error;

/// Library-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Euler–Maruyama propagation produced a non-finite state. `step` is
    /// the index of the first bad grid point (0 means the initial
    /// condition itself was non-finite).
    #[error("non-finite state at step {step} during path propagation")]
    NumericalBlowup { step: usize },

    /// A parameter failed validation at construction time.
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Every raw likelihood is zero, so weights carry no information.
    #[error("degenerate weights: all raw likelihoods are zero")]
    DegenerateWeights,

    /// The conditional sampler aborted because the current chain state
    /// (not a proposal) could not be evaluated.
    #[error("conditional sampler aborted at ladder level {level}, trial {trial}: {source}")]
    Sampler {
        level: usize,
        trial: usize,
        #[source]
        source: Box<Error>,
    },

    /// A per-particle operation failed inside a filter step.
    #[error("particle {index}: {source}")]
    Particle {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
