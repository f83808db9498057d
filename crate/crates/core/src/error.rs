use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("topology error: {0}")]
    Topology(String),

    #[error("non-manifold face {face:?} shared by {count} cells")]
    NonManifold { face: Vec<usize>, count: usize },

    #[error("degenerate {kind}: measure {measure:e} below tolerance {tolerance:e}")]
    Degenerate {
        kind: &'static str,
        measure: f64,
        tolerance: f64,
    },

    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("parse error in {path}: {msg}")]
    Parse { path: String, msg: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("oracle became unstable at frame {frame} (energy {energy:e}); increase substeps")]
    Unstable { frame: usize, energy: f64 },

    #[error("gradient check failed: max relative error {0:e}")]
    GradCheck(f64),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonFinite(_) | Error::Unstable { .. } | Error::GradCheck(_) => 3,
            Error::Parameter(_) => 1,
            _ => 2,
        }
    }
}
