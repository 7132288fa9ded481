use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {file}, line {line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },

    #[error("unsupported signal format {format} in {file}")]
    UnsupportedFormat { file: String, format: String },

    #[error("truncated signal file {file}: expected {expected} bytes, found {actual}")]
    Truncated {
        file: String,
        expected: u64,
        actual: u64,
    },

    #[error("annotation at sample {index} is beyond record length {length}")]
    AnnotationOutOfRange { index: usize, length: usize },

    #[error("lead {requested} not found; available leads: {}", available.join(", "))]
    LeadNotFound {
        requested: String,
        available: Vec<String>,
    },

    #[error("empty lead selection")]
    EmptySelection,

    #[error("signal too short: {actual} samples, need at least {required}")]
    SignalTooShort { actual: usize, required: usize },

    #[error("degenerate segment: {0}")]
    DegenerateSegment(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate training set: {0}")]
    DegenerateTraining(String),

    #[error("shape mismatch: expected {expected} features, got {given}")]
    Shape { expected: usize, given: usize },

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },

    #[error("model load error: {0}")]
    ModelLoad(String),

    #[error("model kind mismatch: expected {expected}, file holds {found}")]
    KindMismatch { expected: String, found: String },

    #[error("unknown label {0}")]
    UnknownLabel(String),

    #[error("stage {stage} failed on record {record}: {source}")]
    Stage {
        stage: &'static str,
        record: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(file: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            file: file.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn at_stage(self, stage: &'static str, record: impl Into<String>) -> Self {
        Error::Stage {
            stage,
            record: record.into(),
            source: Box::new(self),
        }
    }

    /// Short machine-readable tag for the error category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::UnsupportedFormat { .. } => "unsupported-format",
            Error::Truncated { .. } => "truncated",
            Error::AnnotationOutOfRange { .. } => "out-of-range",
            Error::LeadNotFound { .. } => "lead-not-found",
            Error::EmptySelection => "empty-selection",
            Error::SignalTooShort { .. } => "length",
            Error::DegenerateSegment(_) => "degenerate-segment",
            Error::Config(_) => "config",
            Error::InsufficientData(_) => "insufficient-data",
            Error::DegenerateTraining(_) => "degenerate-training",
            Error::Shape { .. } => "shape",
            Error::Diverged { .. } => "training-failure",
            Error::ModelLoad(_) => "model-load",
            Error::KindMismatch { .. } => "kind-mismatch",
            Error::UnknownLabel(_) => "unknown-label",
            Error::Stage { .. } => "stage",
        }
    }
}
