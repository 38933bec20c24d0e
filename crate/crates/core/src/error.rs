//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by parsing, construction, training and inference.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed CSV input, naming file, line and field.
    #[error("{file}:{line}: invalid {field}: {message}")]
    Csv {
        file: String,
        line: u64,
        field: String,
        message: String,
    },

    /// Duplicate entity id in entities.csv or duplicate (id, slot) in records.csv.
    #[error("{file}:{line}: duplicate {what}")]
    Duplicate {
        file: String,
        line: u64,
        what: String,
    },

    /// Record row referencing an id absent from entities.csv.
    #[error("{file}:{line}: unknown entity id {id:?}")]
    UnknownRecordId {
        file: String,
        line: u64,
        id: String,
    },

    #[error("unknown entity id {0:?}")]
    UnknownEntity(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate graph: {0}")]
    DegenerateGraph(String),

    #[error("co-located entities {a:?} and {b:?} at distance 0")]
    CoLocated { a: String, b: String },

    #[error("no usable slots in regression window for target {target:?}")]
    NoUsableSlots { target: String },

    #[error(
        "singular normal system for target {target:?}; a positive ridge_lambda is required"
    )]
    SingularSystem { target: String },

    #[error("entity {0:?} has no incoming influence")]
    NoIncomingInfluence(String),

    #[error("no negative candidates for neighbor {neighbor:?} even after widening the band")]
    NoNegativeCandidates { neighbor: String },

    #[error("non-finite loss in {phase} phase, epoch {epoch}, sample {sample} (target {target:?})")]
    NonFiniteLoss {
        phase: &'static str,
        epoch: usize,
        sample: usize,
        target: String,
    },

    #[error("no edge from {from:?} to {to:?}")]
    MissingEdge { from: String, to: String },

    #[error("metric input is degenerate: {0}")]
    DegenerateMetric(String),

    #[error("artifact kind mismatch: expected {expected:?}, found {found:?}")]
    ArtifactKind { expected: String, found: String },

    #[error("schema version mismatch: file has {found}, this build expects {expected}")]
    SchemaVersion { found: u32, expected: u32 },

    #[error("artifact corrupt: {0}")]
    Corrupt(String),

    #[error("content hash mismatch: stored {stored}, computed {computed}")]
    HashMismatch { stored: String, computed: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
