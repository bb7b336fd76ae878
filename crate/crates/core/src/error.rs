use thiserror::Error;

/// Errors raised by tensor algebra, solvers, scorers and the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mode {mode} for a tensor of order {order}")]
    InvalidMode { mode: usize, order: usize },

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("rank {rank} exceeds the {rows} rows of mode {mode}")]
    RankTooLarge { rank: usize, mode: usize, rows: usize },

    #[error("update diverged in mode {mode} at step {step}")]
    Divergence { mode: usize, step: u64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("event {index}: {source}")]
    Event {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::InvalidShape(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Attach the index of the streamed event that produced this error.
    pub fn at_event(self, index: usize) -> Self {
        Error::Event {
            index,
            source: Box::new(self),
        }
    }

    /// True when the root cause is a numerical divergence of a solver.
    pub fn is_divergence(&self) -> bool {
        match self {
            Error::Divergence { .. } => true,
            Error::Event { source, .. } => source.is_divergence(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
