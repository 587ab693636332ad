use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    #[error("empty action score vector")]
    EmptyScores,

    #[error("loss is not a scalar recorded on this tape")]
    LossNotOnTape,

    #[error("variable does not belong to this tape")]
    ForeignVar,

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("graph has no triples")]
    EmptyGraph,

    /// Returned by name lookups; distinguishable from every other failure.
    #[error("not found: {0}")]
    NotFound(String),

    #[error("unknown entity id {0}")]
    UnknownEntity(usize),

    #[error("conversation {conversation}, turn {turn}: {message}")]
    InvalidTurn {
        conversation: String,
        turn: usize,
        message: String,
    },

    #[error("empty question")]
    EmptyQuestion,

    #[error("empty token list")]
    EmptyTokens,

    #[error("empty history")]
    EmptyHistory,

    #[error("action (relation {relation}, edge {edge}, tail {tail}) is not available at entity {node}")]
    IllegalAction {
        node: usize,
        relation: usize,
        edge: usize,
        tail: usize,
    },

    #[error("step {step} is at the horizon {horizon}; no further moves allowed")]
    HorizonExceeded { step: usize, horizon: usize },

    #[error("reward requested at step {step} before the horizon {horizon}")]
    NotTerminal { step: usize, horizon: usize },

    #[error("enumeration bound exceeded: {paths} paths > {limit}; use a smaller graph or horizon")]
    EnumerationBound { paths: u128, limit: u128 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite loss in update {update}; offending episode: {episode}")]
    NonFinite { update: usize, episode: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(expected: impl ToString, got: impl ToString) -> Self {
        Error::Shape {
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }
}
