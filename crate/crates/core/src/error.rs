use std::path::PathBuf;

/// Validation and I/O failures for the core data model and its file formats.
///
/// Line numbers are 1-based and count the header line.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("file not found: {0}")]
    MissingFile(PathBuf),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid JSON in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("line {line}: expected frame {expected}, found {found}")]
    NonContiguousFrames {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: emotion row sums to {sum}")]
    RowSumOutOfTolerance { line: usize, sum: f64 },
    #[error("probability {value} out of [0, 1] ({context})")]
    ProbabilityOutOfRange { value: f64, context: String },
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("duplicate video id {0:?}")]
    DuplicateVideoId(String),
    #[error("duplicate event {onset}/{apex}/{offset} {label:?}")]
    DuplicateEvent {
        onset: usize,
        apex: usize,
        offset: usize,
        label: String,
    },
    #[error("invalid interval: onset {onset}, apex {apex}, offset {offset}")]
    InvalidInterval {
        onset: usize,
        apex: usize,
        offset: usize,
    },
    #[error("invalid label set: {0}")]
    InvalidLabels(String),
    #[error("invalid class priors: {0}")]
    InvalidPriors(String),
    #[error("invalid track: {0}")]
    InvalidTrack(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path)
        } else {
            Error::Io { path, source }
        }
    }
}
