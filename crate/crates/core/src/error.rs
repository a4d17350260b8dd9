use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report. Each variant maps to a distinct
/// process exit code through [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("parse error {}{}: {message}", location(*line), key.as_ref().map(|k| format!(" (key `{k}`)")).unwrap_or_default())]
    Parse {
        line: usize,
        key: Option<String>,
        message: String,
    },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("enumeration refused: {estimate:e} joint policies exceeds the limit of {limit:e}")]
    TooLarge { estimate: f64, limit: f64 },

    #[error("incompatible checkpoint: {0}")]
    Incompatible(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Line 0 marks values that came from `FAIRLEAD_<KEY>` variables.
fn location(line: usize) -> String {
    if line == 0 {
        "in an environment override".into()
    } else {
        format!("at line {line}")
    }
}

impl Error {
    pub fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            key: None,
            message: message.into(),
        }
    }

    pub fn parse_key(line: usize, key: &str, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            key: Some(key.to_string()),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Parse { .. } => 3,
            Error::Usage(_) => 4,
            Error::Domain(_) => 5,
            Error::NoConvergence { .. } => 6,
            Error::TooLarge { .. } => 7,
            Error::Incompatible(_) => 8,
            Error::Io(_) => 9,
        }
    }
}
