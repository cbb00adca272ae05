use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Malformed input bytes or text. `location` is a byte offset or a line
    /// number depending on the format.
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("region out of bounds: {0}")]
    Bounds(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("time regression: {0}")]
    TimeRegression(String),

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("insufficient overlap: {0}")]
    InsufficientOverlap(String),

    #[error("routing error: {0}")]
    Routing(String),

    #[error("sequencing error: {0}")]
    Sequencing(String),

    #[error("incomplete design: {0}")]
    IncompleteDesign(String),

    #[error("degenerate pairs: {0}")]
    DegeneratePairs(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn parse_at_offset(offset: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            location: format!("byte offset {offset}"),
            message: message.into(),
        }
    }

    /// Parse error in a named text source at a 1-based line.
    pub fn parse_in(source: &str, line: u64, message: impl Into<String>) -> Self {
        Error::Parse {
            location: format!("{source} line {line}"),
            message: message.into(),
        }
    }

    /// Prefixes a parse location with the name of its source.
    pub fn in_source(self, source: &str) -> Self {
        match self {
            Error::Parse { location, message } => Error::Parse {
                location: format!("{source} {location}"),
                message,
            },
            other => other,
        }
    }
}
