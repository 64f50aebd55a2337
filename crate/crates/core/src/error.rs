use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Malformed input text; `line` is 1-based.
    #[error("{message} at line {line}")]
    Parse { line: usize, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{0} must not be empty")]
    Empty(&'static str),

    #[error("score {score} at index {index} lies outside [{lower}, {upper}]")]
    ScoreOutOfBounds {
        index: usize,
        score: f64,
        lower: f64,
        upper: f64,
    },

    #[error("split with fraction {fraction} of {total} records leaves an empty side")]
    EmptySplit { fraction: f64, total: usize },

    #[error("unknown distribution `{0}` (expected uniform01, beta(a,b) or two-point(p,v1,v2))")]
    UnknownDistribution(String),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }
}
