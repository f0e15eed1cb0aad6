use std::path::PathBuf;

use crate::ClassId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("truncated image: expected {expected} pixels, found {found}")]
    TruncatedImage { expected: usize, found: usize },

    #[error("unsupported bit depth: maxval {0} exceeds 255")]
    UnsupportedDepth(u32),

    #[error("{}: {source}", path.display())]
    FileError {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("manifest line {line}: {message}")]
    ManifestSyntax { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("matrix is not symmetric")]
    NotSymmetric,

    #[error("Jacobi iteration did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("class {0} has no positive exemplars")]
    EmptyClass(ClassId),

    #[error("class {0} has no counterexamples from other classes")]
    NoCounterexamples(ClassId),

    #[error("at least two classes are required, found {0}")]
    InsufficientClasses(usize),

    #[error("store {}: {message}", root.display())]
    Store { root: PathBuf, message: String },

    #[error("checksum mismatch in {}", path.display())]
    ChecksumMismatch { path: PathBuf },

    #[error("malformed file {}: {message}", path.display())]
    MalformedFile { path: PathBuf, message: String },

    #[error("weights unavailable for class {0}")]
    WeightsUnavailable(ClassId),

    #[error("unknown class {0}")]
    UnknownClass(ClassId),

    #[error("protocol error for class {class_id}: {message}")]
    ProtocolError { class_id: ClassId, message: String },
}

impl Error {
    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::FileError {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::MalformedFile {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn dims(expected: usize, got: usize) -> Self {
        Error::DimensionMismatch { expected, got }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_)
            | Error::InsufficientClasses(_)
            | Error::ManifestSyntax { .. } => 2,
            Error::WeightsUnavailable(_) => 3,
            _ => 1,
        }
    }
}
