use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed NIfTI header field `{field}`: {reason}")]
    Parse { field: &'static str, reason: String },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("invalid voxel data: {0}")]
    Data(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("index out of bounds: {0}")]
    Bounds(String),

    #[error("invalid phantom spec: {0}")]
    Spec(String),

    #[error("oracle input too large: {0}")]
    OracleScale(String),

    #[error("invalid manifest: {0}")]
    Manifest(String),

    #[error("scan `{scan_id}`: {source}")]
    Scan {
        scan_id: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_scan(self, scan_id: &str) -> Self {
        Error::Scan {
            scan_id: scan_id.to_owned(),
            source: Box::new(self),
        }
    }

    /// True for errors caused by invalid user configuration or manifests,
    /// as opposed to failures while processing a particular scan.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) | Error::Manifest(_) | Error::Spec(_) => true,
            Error::Scan { source, .. } => source.is_config(),
            _ => false,
        }
    }
}
