use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("infeasible topology: {0}")]
    Infeasible(String),

    #[error("dataset parse error at line {line}, byte {byte}: {msg}")]
    Parse { line: u64, byte: u64, msg: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("missing forward cache")]
    MissingCache,

    #[error("step called after the episode finished")]
    EpisodeDone,

    #[error("empty topology dataset")]
    EmptyDataset,

    #[error("joint action space of {agents} agents exceeds the enumeration guard of {guard} agents")]
    EnumerationGuard { agents: usize, guard: usize },

    #[error("degenerate normalization bounds: g_max = g_min = {0}")]
    DegenerateBounds(f64),

    #[error("coordination difficulty undefined: {0}")]
    Cds(String),

    #[error("non-finite loss {loss} in {algorithm} at episode {episode}")]
    NonFinite { algorithm: String, episode: usize, loss: f64 },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("aggregation: {0}")]
    Aggregate(String),

    #[error("csv: {0}")]
    Csv(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Short machine-readable kind used by the command-line error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Infeasible(_) => "infeasible",
            Error::Parse { .. } => "parse",
            Error::Io { .. } => "io",
            Error::Shape { .. } => "shape",
            Error::MissingCache => "missing_cache",
            Error::EpisodeDone => "episode_done",
            Error::EmptyDataset => "empty_dataset",
            Error::EnumerationGuard { .. } => "enumeration_guard",
            Error::DegenerateBounds(_) => "degenerate_bounds",
            Error::Cds(_) => "cds",
            Error::NonFinite { .. } => "non_finite",
            Error::Checkpoint(_) => "checkpoint",
            Error::Aggregate(_) => "aggregate",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
