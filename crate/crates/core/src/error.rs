use std::path::PathBuf;

use thiserror::Error;

use crate::{AuthorId, PaperId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    MalformedLine { line: usize, message: String },

    #[error("duplicate paper id {0}")]
    DuplicatePaper(PaperId),

    #[error("paper {paper} ({year}) references paper {target} from a later year ({target_year})")]
    FutureReference {
        paper: PaperId,
        year: i32,
        target: PaperId,
        target_year: i32,
    },

    #[error("author {0} has no papers in the snapshot")]
    NoPapers(AuthorId),

    #[error("empty corpus for topic model")]
    EmptyTopicCorpus,

    #[error("paper {0} has no row in the topic model")]
    UnmodeledPaper(PaperId),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("feature matrix is already log-transformed")]
    AlreadyTransformed,

    #[error("singular least-squares system; use ridge > 0")]
    Singular,

    #[error("empty true set")]
    EmptyTrueSet,

    #[error("group of size {0} cannot be split (need at least 2)")]
    GroupTooSmall(usize),

    #[error("unknown feature group: {0}")]
    UnknownFeatureGroup(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("infeasible synthetic config: {0}")]
    Infeasible(String),

    #[error("corpus was not generated from this synthetic config (provenance hash mismatch)")]
    Provenance,

    #[error("unknown key: {0}")]
    UnknownKey(String),

    #[error("key {key}: expected {expected}")]
    KeyType { key: String, expected: &'static str },

    #[error("config: {0}")]
    Config(String),

    #[error("missing artifact {path}; run stage: {stage}")]
    MissingArtifact { stage: &'static str, path: PathBuf },

    #[error("stale artifact from stage {stage} (config hash {found}, expected {expected}); run stage: {stage}")]
    StaleArtifact {
        stage: &'static str,
        found: String,
        expected: String,
    },

    #[error("unknown stage: {0}")]
    UnknownStage(String),

    #[error("{0}")]
    Workdir(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

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
