use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::schema::Violation;

fn join(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("invalid JSON: {0}")]
    Json(String),
    #[error("record violates schema: {}", join(.0))]
    Violations(Vec<Violation>),
}

#[derive(Debug, Error)]
pub enum AliasError {
    #[error("alias chain: '{alias}' maps to '{canonical}', which is itself an alias of '{next}'")]
    Chain {
        alias: String,
        canonical: String,
        next: String,
    },
    #[error("alias '{0}' is defined twice with different targets")]
    Conflict(String),
    #[error("empty alias or canonical value")]
    Empty,
    #[error("alias map is not a JSON object of strings: {0}")]
    Format(String),
    #[error("reading alias map {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid profile '{department}': {reason}")]
    InvalidProfile { department: String, reason: String },
    #[error("invalid batch spec: {0}")]
    InvalidSpec(String),
    #[error("reading profile {path}: {reason}")]
    ProfileFile { path: PathBuf, reason: String },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("source_id '{0}' appears in both inputs with different content")]
    SourceIdCollision(String),
    #[error("source_id '{0}' is not unique within its input")]
    DuplicateSourceId(String),
    #[error("record '{source_id}' violates schema: {}", join(.violations))]
    InvalidRecord {
        source_id: String,
        violations: Vec<Violation>,
    },
    #[error("record '{0}' has empty raw text")]
    EmptyRawText(String),
    #[error("dataset is empty")]
    Empty,
    #[error("bad split ratios {0:?}: must be positive and sum to 1")]
    BadRatios([f64; 3]),
    #[error("bundle has not been split")]
    NotSplit,
    #[error("invalid LoRA config: {0}")]
    InvalidLoraConfig(String),
    #[error("{path}: line {line}: {reason}")]
    Format {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("endpoint returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("could not extract a record: {reason}")]
    Extraction {
        reason: String,
        violations: Vec<Violation>,
        raw_response: String,
    },
    #[error("malformed endpoint response: {0}")]
    MalformedResponse(String),
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("gateway configuration: {0}")]
    Config(String),
}

impl GatewayError {
    /// Raw model output kept for debugging, when there is one.
    pub fn raw_response(&self) -> Option<&str> {
        match self {
            GatewayError::Extraction { raw_response, .. } => Some(raw_response),
            _ => None,
        }
    }

    pub(crate) fn is_retryable(&self) -> bool {
        match self {
            GatewayError::Transport { .. } | GatewayError::Timeout { .. } => true,
            GatewayError::Status { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("test split is empty")]
    EmptyTestSplit,
    #[error("no rows to compare")]
    NoRows,
    #[error("cannot compare '{fine_tuned}' against base '{base}': model families differ")]
    FamilyMismatch { fine_tuned: String, base: String },
    #[error("invalid evaluation config: {0}")]
    Config(String),
    #[error("test sample '{0}' appears more than once")]
    DuplicateSample(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

/// Command-level failure, classified for the process exit code.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("endpoint error: {0}")]
    Endpoint(String),
    #[error("thresholds not met: {}", .0.join("; "))]
    Threshold(Vec<String>),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Data(_) => 3,
            PipelineError::Endpoint(_) => 4,
            PipelineError::Threshold(_) => 5,
        }
    }

    pub(crate) fn io(path: &std::path::Path, e: io::Error) -> Self {
        PipelineError::Data(format!("{}: {e}", path.display()))
    }
}

impl From<AliasError> for PipelineError {
    fn from(e: AliasError) -> Self {
        PipelineError::Config(e.to_string())
    }
}

impl From<GatewayError> for PipelineError {
    fn from(e: GatewayError) -> Self {
        match e {
            GatewayError::Config(_) => PipelineError::Config(e.to_string()),
            _ => PipelineError::Endpoint(e.to_string()),
        }
    }
}

impl From<SynthError> for PipelineError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Gateway(g) => g.into(),
            other => PipelineError::Config(other.to_string()),
        }
    }
}

impl From<DatasetError> for PipelineError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::BadRatios(_) | DatasetError::InvalidLoraConfig(_) => PipelineError::Config(e.to_string()),
            _ => PipelineError::Data(e.to_string()),
        }
    }
}

impl From<EvalError> for PipelineError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Config(_) => PipelineError::Config(e.to_string()),
            EvalError::Dataset(d) => d.into(),
            _ => PipelineError::Data(e.to_string()),
        }
    }
}
