//! Error type shared by all modules.

use thiserror::Error;

use crate::graph::ValidationReport;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("malformed graph json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unknown node kind `{kind}` for node `{id}`")]
    UnknownNodeKind { id: String, kind: String },
    #[error("node `{id}`: {reason}")]
    BadRate { id: String, reason: String },
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),
    #[error("edge references missing node `{0}`")]
    DanglingEdge(String),
    #[error("graph contains a cycle: {}", cycle.join(" -> "))]
    Cycle { cycle: Vec<String> },
    #[error("graph failed validation:\n{0}")]
    Invalid(ValidationReport),
    #[error("number of processing elements must be positive")]
    InvalidP,
    #[error("node `{0}` is not element-wise")]
    NotElementwise(String),
    #[error("node `{0}` is an upsampler")]
    UpsamplerPresent(String),
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("invalid volume range: {0}")]
    InvalidVolumeRange(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("inconsistent inputs: {0}")]
    Mismatch(String),
    #[error("arithmetic overflow in {0}")]
    Overflow(&'static str),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
    #[error("schedule has zero makespan")]
    ZeroMakespan,
}
