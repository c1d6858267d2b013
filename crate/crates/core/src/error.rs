use std::path::PathBuf;

use crate::alignment::ConstraintReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("scene has no points")]
    EmptyScene,

    #[error("frame {frame} has {found} vertices, expected {expected}")]
    InconsistentVertexCount {
        frame: usize,
        expected: usize,
        found: usize,
    },

    #[error("missing body region `{0}`")]
    MissingRegion(String),

    #[error("index {index} out of range for {len} vertices")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("no object instance has at least {min_points} points")]
    NoObjects { min_points: usize },

    #[error("sampling surface is empty")]
    EmptySurface,

    #[error("no valid floor target near instance {instance_id}")]
    NoValidTarget { instance_id: u32 },

    #[error("no action policy registered for `{0}`")]
    UnknownAction(String),

    #[error("no interactable object for action `{0}`")]
    NoInteractableObject(String),

    #[error("no placement satisfied every constraint after {tries} tries")]
    ExhaustedTries {
        tries: usize,
        best: Option<Box<ConstraintReport>>,
    },

    #[error("no spatial relation uniquely identifies instance {0}")]
    NoUniqueReference(u32),

    #[error("description matches {0} instances")]
    Ambiguous(usize),

    #[error("description matches no instance")]
    NoMatch,

    #[error("body surface needs at least {needed} points, got {got}")]
    DegenerateBody { needed: usize, got: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

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
