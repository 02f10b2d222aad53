use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent configuration (characterization table, run config).
    #[error("configuration error: {0}")]
    Config(String),

    /// An argument outside the domain of a cost-model function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A DNN model that violates its structural invariants.
    #[error("model error: {0}")]
    Model(String),

    #[error("infeasible: {resource} budget {budget} cannot hold {required} even at the smallest parallel factor")]
    Infeasible {
        resource: &'static str,
        required: f64,
        budget: f64,
    },

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("move rejected: {0}")]
    RejectedMove(String),

    #[error("planning error: buffer `{buffer}` overflows on-chip memory ({needed} of {available} bytes)")]
    Planning {
        buffer: String,
        needed: u64,
        available: u64,
    },

    #[error("evaluator error: {0}")]
    Evaluator(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
