use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied parameter is outside its domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dataset is empty; at least one sample is required")]
    EmptyDataset,

    #[error("phase grid is not equispaced; the dithering cell is undefined")]
    NonEquispacedGrid,

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed metadata in {path}: {message}")]
    Metadata { path: PathBuf, message: String },

    /// A numerical accuracy gate was not met.
    #[error("accuracy gate failed: {0}")]
    Accuracy(String),

    #[error(
        "angular grid too coarse for |alpha| * b_cut = {scale:.3}: {given} nodes given, {required} required"
    )]
    OscillationResolution {
        scale: f64,
        given: usize,
        required: usize,
    },

    #[error("standard error is zero at alpha = {re} + {im}i; significance undefined")]
    ZeroStdErr { re: f64, im: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Process exit code used by the command-line tool: 2 usage, 3 I/O, 4 numeric gate.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_)
            | Error::EmptyDataset
            | Error::NonEquispacedGrid
            | Error::ZeroStdErr { .. }
            | Error::GridMismatch(_) => 2,
            Error::Parse { .. } | Error::Io { .. } | Error::Metadata { .. } => 3,
            Error::Accuracy(_) | Error::OscillationResolution { .. } => 4,
        }
    }
}
