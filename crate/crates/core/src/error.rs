//! Error type shared by all modules.

use thiserror::Error;

/// Errors surfaced by dataset validation, geometry, construction and the harness.
#[derive(Debug, Error)]
pub enum Error {
    /// The noise radius violates `delta < c0 * min_j |mean_j - grand_mean|`.
    #[error("separation violated: delta {delta} >= {c0} * {min_sep} (c0 * min separation)")]
    SeparationViolation { delta: f64, c0: f64, min_sep: f64 },

    /// A required cone opening angle reached or exceeded pi.
    #[error("cone condition violated: required opening angle {angle} rad >= pi")]
    ConeViolation { angle: f64 },

    /// A class has all deviations exactly zero.
    #[error("class {class} has zero deviation block")]
    DegenerateCluster { class: usize },

    /// The output matrix Y is not invertible at the configured threshold.
    #[error("output matrix is singular (condition number {cond:.3e})")]
    SingularOutputs { cond: f64 },

    /// The reduced means matrix is not invertible.
    #[error("reduced means matrix is singular")]
    SingularSimplex,

    /// A ball to be enclosed contains the cone apex.
    #[error("ball of radius {radius} around a point at distance {dist} swallows the cone apex")]
    BallSwallowsApex { dist: f64, radius: f64 },

    /// No translation depth D > 2*delta*sqrt(Q) exists for the data.
    #[error("translated-cone containment fails on the whole candidate interval")]
    NoValidInterval,

    /// Matrix dimensions do not match what the operation requires.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A weight matrix that must be invertible is numerically singular.
    #[error("weight matrix is singular or too ill-conditioned to invert")]
    SingularWeight,

    /// A regime parameter lies in the transitional band or outside both intervals.
    #[error("mu[{index}] = {value} is outside both regime intervals")]
    RegimeViolation { index: usize, value: f64 },

    /// The hidden state lost full row rank, so the projector does not exist.
    #[error("hidden state is rank deficient (rank {rank} < {expected})")]
    RankDeficient { rank: usize, expected: usize },

    /// The mean-reduced hidden state is not invertible.
    #[error("mean-reduced hidden state is singular")]
    SingularReducedMeans,

    /// An eigenvalue fell below the negativity tolerance of a PSD matrix.
    #[error("matrix is not positive semidefinite (eigenvalue {eigenvalue:.3e})")]
    NotPSD { eigenvalue: f64 },

    /// A preactivation sits too close to the ReLU kink for finite differences.
    #[error("non-smooth point: preactivation margin {margin:.3e} below {required:.3e}")]
    NonSmoothPoint { margin: f64, required: f64 },

    /// Dataset generation kept failing the validity conditions.
    #[error("dataset generation failed after {rounds} rejection rounds")]
    GenerationFailed { rounds: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    /// Free-form invalid input (bad config values, malformed files).
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
