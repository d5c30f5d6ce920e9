use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the simulator, the oracle and the experiment harness.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("slot {slot} is outside the recorded range 0..={max}")]
    SlotOutOfRange { slot: u64, max: u64 },

    #[error("window start {from} is after window end {to}")]
    InvertedWindow { from: u64, to: u64 },

    #[error("node {node} is outside 0..{m}")]
    NodeOutOfRange { node: usize, m: usize },

    #[error("innovation log is disabled; enable it to recompute window sums")]
    InnovationLogDisabled,

    #[error("delivered outcome for node {0} carries no sample value")]
    MissingDeliveredValue(usize),

    #[error("a sample value was supplied for a slot without a delivery")]
    UnexpectedDeliveredValue,

    #[error("slot mismatch: sources at {sources}, receiver view at {view}")]
    SlotMismatch { sources: u64, view: u64 },

    #[error("metrics accumulator expected slot {expected}, got {got}")]
    OutOfOrderSlot { expected: u64, got: u64 },

    #[error("policy {0} is centralized and has no per-node decision rule")]
    CentralizedPolicy(&'static str),

    #[error("policy {0} is decentralized and has no central scheduler")]
    DecentralizedPolicy(&'static str),

    #[error("need at least {needed} closed intervals, have {have}")]
    NotEnoughRecords { needed: usize, have: usize },

    #[error("erasure probability must be below 1, got {0}")]
    ErasureProbabilityOne(f64),

    #[error("non-positive oracle parameter `{name}` = {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },

    #[error("{capped} of {paths} paths hit the step cap ({fraction:.3e} > {limit:.0e})")]
    PathCapExceeded {
        capped: u64,
        paths: u64,
        fraction: f64,
        limit: f64,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl SimError {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        SimError::InvalidConfig {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SimError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::PathCapExceeded { .. } => 2,
            SimError::Io { .. } | SimError::Csv(_) => 3,
            _ => 1,
        }
    }
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;
