use std::path::PathBuf;

use thiserror::Error;

use crate::kg::ConceptId;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("I/O error: {0}")]
    RawIo(#[from] std::io::Error),

    #[error("empty knowledge graph")]
    EmptyGraph,

    #[error("invalid concept id {0}")]
    InvalidConcept(ConceptId),

    #[error("invalid relation id {0}")]
    InvalidRelation(u32),

    #[error("malformed merge map line {line}: {message}")]
    MergeMap { line: usize, message: String },

    #[error("source and destination are the same concept {0}")]
    SameEndpoints(ConceptId),

    #[error("ungroundable pair: {0}")]
    Ungroundable(String),

    #[error("bad snapshot: {0}")]
    Snapshot(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("missing initial vector for concept {0}")]
    MissingInitVector(ConceptId),

    #[error("forward trace does not retain intermediates; run a training forward pass")]
    MissingTrace,

    #[error("non-finite loss {value} ({context})")]
    NonFiniteLoss { value: f64, context: String },

    #[error("dataset line {line}: {message}")]
    Dataset { line: usize, message: String },

    #[error("missing statement features for ({id}, {candidate})")]
    MissingFeature { id: String, candidate: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } | Error::RawIo(_) => "io",
            Error::EmptyGraph => "empty_graph",
            Error::InvalidConcept(_) => "invalid_concept",
            Error::InvalidRelation(_) => "invalid_relation",
            Error::MergeMap { .. } => "merge_map",
            Error::SameEndpoints(_) => "same_endpoints",
            Error::Ungroundable(_) => "ungroundable",
            Error::Snapshot(_) => "snapshot",
            Error::Dimension { .. } => "dimension",
            Error::MissingInitVector(_) => "missing_init_vector",
            Error::MissingTrace => "missing_trace",
            Error::NonFiniteLoss { .. } => "non_finite_loss",
            Error::Dataset { .. } => "dataset",
            Error::MissingFeature { .. } => "missing_feature",
            Error::Config(_) => "config",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
