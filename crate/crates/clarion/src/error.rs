//! Crate-wide error type.
//!
//! Every fallible operation in the library returns [`Result`]. Errors carry
//! enough context (paths, line numbers, offending ids) that a CLI front end
//! can print them verbatim and exit.

use thiserror::Error;

/// Alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Underlying I/O failure (file missing, permission denied, ...).
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// A dataset line that is not a well-formed record.
    #[error("{path}:{line}: malformed record: {msg}")]
    MalformedRecord {
        path: String,
        line: usize,
        msg: String,
    },

    /// A case whose `target_doc_id` names no document in the collection.
    #[error("case {user_id} references unknown document {doc_id}")]
    DanglingTarget { user_id: String, doc_id: String },

    /// Two documents with the same id in one collection.
    #[error("duplicate document id {0}")]
    DuplicateDocId(String),

    /// An operation that needs documents was given an empty collection.
    #[error("document collection is empty")]
    EmptyCollection,

    /// An operation that needs cases was given none.
    #[error("dataset has no cases")]
    NoCases,

    /// Splitting requires at least 8 cases so every split is non-empty.
    #[error("cannot split {0} cases: need at least 8")]
    TooFewCases(usize),

    /// Lookup of a document id that is not in the collection.
    #[error("unknown document id {0}")]
    UnknownDoc(String),

    /// A vector had the wrong length for the requested operation.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    /// A scalar argument outside its documented range.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// Replay sampling was requested from a buffer with too few transitions.
    #[error("replay buffer holds {have} transitions, need {need}")]
    UnderfullBuffer { have: usize, need: usize },

    /// Training produced a non-finite loss; the run cannot continue.
    #[error("training diverged: non-finite loss at episode {episode}")]
    Divergence { episode: usize },

    /// `step` called on an episode that already ended.
    #[error("episode is already terminal")]
    EpisodeTerminal,

    /// Bad key, value, or syntax in a key=value config file.
    #[error("config: {0}")]
    Config(String),

    /// Unreadable or inconsistent checkpoint file.
    #[error("checkpoint: {0}")]
    Checkpoint(String),

    /// An external chat adapter failed; episodes never fall back silently.
    #[error("adapter: {0}")]
    Adapter(String),

    /// JSON (de)serialization failure outside dataset loading.
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Wrap an I/O error with the path it concerns.
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
