//! Error type shared across the pipeline.
//!
//! Variants are grouped by how the CLI reports them: configuration problems
//! exit with 1, data problems (unreadable/malformed/degenerate input) with 2,
//! and internal invariant violations with 3.

use std::io;
use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid configuration or unusable parameter values.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Filesystem-level failure for a named path.
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    /// Malformed content at a specific line of an input file.
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    /// File-level data problem (bad header, nothing usable, ...).
    #[error("{}: {message}", path.display())]
    Data { path: PathBuf, message: String },

    /// Arguments that no amount of configuration can make usable.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Point set too small or too flat for a polygonal footprint.
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// Density estimation over coincident points; fall back to raw points.
    #[error("zero spatial variance: {0}")]
    ZeroVariance(String),

    /// Contour extraction over a constant density field.
    #[error("density grid is flat; no contour level exists")]
    FlatGrid,

    /// Agreement set is empty, so recall is undefined.
    #[error("ground truth contains no agreed names")]
    EmptyGroundTruth,

    /// Majority voting needs at least `need` distinct annotators.
    #[error("found {have} distinct annotators, need at least {need}")]
    TooFewAnnotators { have: usize, need: usize },

    /// A bug: an invariant the code promises to uphold was violated.
    #[error("internal invariant violated: {0}")]
    Internal(String),

    /// Failure wrapped with the pipeline stage it occurred in.
    #[error("stage '{stage}': {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn stage(stage: &str, err: Error) -> Error {
        Error::Stage {
            stage: stage.to_string(),
            source: Box::new(err),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Error {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code the CLI maps this error to.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Internal(_) => 3,
            Error::Stage { source, .. } => source.exit_code(),
            _ => 2,
        }
    }
}
