use thiserror::Error;

/// Errors surfaced by the model, estimators, simulator and algorithms.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Trimming would discard every sample (2k >= N).
    #[error("over-trimmed: k={k} per side with only {n} samples")]
    OverTrimmed { k: usize, n: usize },

    /// The spectral filter removed half of the sample mass without the top
    /// eigenvalue dropping below the stopping threshold. Signals corruption
    /// beyond tolerance or a wrong covariance bound.
    #[error("filter collapse: removed mass {removed:.3} with top eigenvalue {eigenvalue:.3e} still above threshold {threshold:.3e}")]
    FilterCollapse {
        removed: f64,
        eigenvalue: f64,
        threshold: f64,
    },

    /// A user group that the recovery step needs ended up with no samples.
    #[error("empty group: context {context}, action {action}")]
    EmptyGroup { context: usize, action: usize },

    #[error("user {user} never interacted during the phase")]
    NoInteractions { user: usize },

    #[error("agent chose action {action} but the instance has {num_actions} actions")]
    ActionOutOfRange { action: usize, num_actions: usize },

    /// The weight-law construction produced a negative class density; the
    /// parameters are outside the regime where the construction is valid.
    #[error("negative class density at weight {weight} (n={n}, alpha={alpha}, eps={eps}): parameters violate the construction's regime")]
    NegativeDensity {
        weight: usize,
        n: usize,
        alpha: f64,
        eps: f64,
    },

    #[error("serialization: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;
