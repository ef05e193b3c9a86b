use thiserror::Error;

use crate::calibration::TransductiveOutcome;

/// Failure reported by a caller-supplied expert or loss oracle.
pub type OracleError = Box<dyn std::error::Error + Send + Sync>;

pub type Result<T, E = CoreError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid risk budget: {0}")]
    InvalidBudget(String),

    #[error("invalid record `{id}`: {reason}")]
    InvalidRecord { id: String, reason: String },

    #[error("invalid embedding: {0}")]
    InvalidEmbedding(&'static str),

    #[error("embedding dimensions differ ({left} vs {right})")]
    ShapeMismatch { left: usize, right: usize },

    #[error("empirical risk is undefined for an empty decision list")]
    UndefinedRisk,

    #[error("no loss available for cheap-routed item `{0}`")]
    MissingLoss(String),

    #[error("record `{0}` is missing token counts")]
    IncompleteRecord(String),

    #[error("record `{0}` has zero expert tokens")]
    DegenerateTokens(String),

    #[error("token probability sequence is empty")]
    EmptySequence,

    #[error("value {0} is outside [0, 1]")]
    OutOfRange(f64),

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("invalid range: {0}")]
    InvalidRange(String),

    #[error("threshold grid is empty")]
    EmptyGrid,

    #[error("threshold grid is not strictly increasing at position {0}")]
    UnsortedGrid(usize),

    #[error("invalid sampling plan: {0}")]
    InvalidPlan(String),

    #[error("loss oracle failed at sample {position} (record `{id}`): {source}")]
    Oracle {
        position: usize,
        id: String,
        #[source]
        source: OracleError,
    },

    #[error("invalid threshold policy: {0}")]
    InvalidPolicy(String),

    #[error("malformed policy JSON: {0}")]
    PolicyFormat(#[from] serde_json::Error),

    #[error("duplicate item id `{0}`")]
    DuplicateId(String),

    #[error("expert labeling incomplete: {} item(s) unlabeled", .0.unlabeled.len())]
    PartialLabels(Box<TransductiveOutcome>),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("numeric integration did not converge: {0}")]
    Integration(String),
}
