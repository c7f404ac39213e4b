use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid network: {}", .0.join("; "))]
    InvalidNetwork(Vec<String>),

    #[error("malformed linear program: {0}")]
    MalformedLp(String),

    #[error("unbounded input box: {0}")]
    UnboundedBox(String),

    #[error("missing bounds entry for layer {layer} unit {unit}")]
    MissingBounds { layer: usize, unit: usize },

    #[error("unknown unit: layer {layer} unit {unit}")]
    UnknownUnit { layer: usize, unit: usize },

    #[error("infinite bound on variable {0} in indicator constraint")]
    InfiniteBound(String),

    #[error("empty pooling group")]
    EmptyGroup,

    #[error("cannot branch on variable {var}: {reason}")]
    Branch { var: usize, reason: String },

    #[error("LP failure at node {node}: {message}")]
    NodeLp { node: u64, message: String },

    #[error("bound tightening aborted at layer {layer} unit {unit}: {source}")]
    Tighten {
        layer: usize,
        unit: usize,
        #[source]
        source: Box<Error>,
        /// Table with every entry finished before the failure.
        partial: Box<crate::encoder::BoundsTable>,
    },

    #[error("oracle limit: {binaries} binaries exceed the cap of {cap}")]
    OracleCap { binaries: usize, cap: usize },

    #[error("invalid adversarial spec: {0}")]
    InvalidSpec(String),

    #[error("label {label} out of range for {classes} classes")]
    LabelRange { label: usize, classes: usize },

    #[error("unsupported {what} version {found}")]
    Version { what: &'static str, found: u32 },

    #[error("fingerprint mismatch: file was written for {expected}, network is {found}")]
    Fingerprint { expected: String, found: String },

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{layer}: {message}")]
    LayerFormat { layer: String, message: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
