use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("obj line {line}: {msg}")]
    ObjSyntax { line: usize, msg: String },
    #[error("obj line {line}: vertex index {index} out of range (have {count} vertices)")]
    ObjIndex {
        line: usize,
        index: i64,
        count: usize,
    },
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("landmark lifting failed: {misses} of {total} landmarks missed the mesh")]
    LiftFailure { misses: usize, total: usize },
    #[error("texture baking failed: {0}")]
    Bake(String),
    #[error("unsupported operating point: {0}")]
    Unsupported(String),
    #[error("manifest line {line}: {msg}")]
    Manifest { line: usize, msg: String },
    #[error("{failed} of {total} records failed, above the 20% limit")]
    FailureRate { failed: usize, total: usize },
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
