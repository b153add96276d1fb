use thiserror::Error;

/// Failures raised anywhere in the reconstruction pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is rank deficient (singular value ratio {ratio:e})")]
    RankDeficient { ratio: f64 },

    #[error("eigenvalue {re:e}{im:+e}i lies on the principal-root branch cut")]
    BranchCut { re: f64, im: f64 },

    #[error("ambiguous eigenvalue assignment for mode {mode} (target phase {target:.6})")]
    SortingAmbiguity { mode: usize, target: f64 },

    #[error("phase support graph is disconnected")]
    DisconnectedSupport,

    #[error("first-column entry {row} has modulus {modulus:e}; output phase undefined")]
    ZeroFirstColumnEntry { row: usize, modulus: f64 },

    #[error("X- and Y-derived estimates disagree by {disagreement:.3e} (limit {limit:.3e})")]
    CombinationDivergence { disagreement: f64, limit: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("records do not match the measurement plan: {0}")]
    PlanMismatch(String),

    #[error("matrix has zero norm")]
    ZeroMatrix,

    #[error("eigendecomposition did not converge")]
    NoConvergence,

    #[error("cumulative estimate is ill-conditioned (condition number {0:.3e})")]
    IllConditioned(f64),

    #[error("invalid configuration field `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error("serialization: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
