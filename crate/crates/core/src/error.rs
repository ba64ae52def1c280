use std::path::PathBuf;

/// Errors produced by the simulation engine and detectors.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("weight file: {0}")]
    WeightFormat(#[from] WeightFileError),

    #[error("zero-norm channel column for device {0}")]
    ZeroNormColumn(usize),

    #[error("singular system matrix in {0}")]
    Singular(&'static str),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Stream(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    ConfigParse(#[from] toml::de::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Structured failures when reading a weight file.
#[derive(Debug, thiserror::Error, PartialEq)]
pub enum WeightFileError {
    #[error("missing header field `{0}`")]
    MissingHeader(&'static str),

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("missing section `{name}` ({layer})")]
    MissingSection { name: &'static str, layer: String },

    #[error("unexpected section `{found}` where `{expected}` ({layer}) was expected")]
    UnexpectedSection {
        found: String,
        expected: &'static str,
        layer: String,
    },

    #[error("section `{name}` ({layer}) holds {actual} values, expected {expected}")]
    SectionLength {
        name: &'static str,
        layer: String,
        expected: usize,
        actual: usize,
    },

    #[error("dimension mismatch: file is {file}, detector expects {expected}")]
    Dimensions { file: String, expected: String },

    #[error("non-finite weight in section `{name}` ({layer})")]
    NonFinite { name: &'static str, layer: String },

    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
