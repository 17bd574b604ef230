use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TermError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("unknown symbol `{symbol}` at byte {pos}")]
    UnknownSymbolAt { symbol: String, pos: usize },
    #[error("`{symbol}` expects {expected} arguments, found {found}")]
    Arity {
        symbol: String,
        expected: usize,
        found: usize,
    },
    #[error("path {path} leaves the term at depth {depth}")]
    InvalidPath { path: String, depth: usize },
    #[error("rule `{0}` is inadmissible in this direction")]
    Inadmissible(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EnvError {
    #[error(transparent)]
    Term(#[from] TermError),
    #[error("action {action} is not legal in the current state")]
    IllegalAction { action: usize },
    #[error("episode already finished")]
    EpisodeOver,
    #[error("replay failed at action index {index}: {source}")]
    Replay {
        index: usize,
        #[source]
        source: Box<EnvError>,
    },
    #[error("unknown environment `{0}`")]
    UnknownEnv(String),
    #[error("invalid environment config: {0}")]
    Config(String),
    #[error("problem `{0}` needs a goal term")]
    MissingGoal(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("value bound {cap} exceeded")]
    ValueBound { cap: u64 },
    #[error("term is outside the oracle's fragment: {0}")]
    Unsupported(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NeuralError {
    #[error("no trainable or frozen vector for symbol `{0}`")]
    UnknownSymbol(String),
    #[error("action mask is empty")]
    EmptyMask,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("network has no value head")]
    MissingValueHead,
    #[error("non-finite gradient; optimizer step skipped")]
    NonFiniteGradient,
    #[error("behaviour-policy probability is zero")]
    ZeroOldProbability,
    #[error(transparent)]
    Env(#[from] EnvError),
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad checkpoint: {0}")]
    Format(String),
    #[error("metadata: {0}")]
    Json(#[from] serde_json::Error),
}

/// Errors surfaced by training loops and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Term(#[from] TermError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("config: {0}")]
    Config(String),
    #[error("problem file line {line}: {msg}")]
    ProblemFile { line: usize, msg: String },
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
