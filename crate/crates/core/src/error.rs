use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A numeric argument fell outside the range an operation accepts.
    #[error("{name} = {value} is outside {range}")]
    Domain {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    /// Configuration rejected; `field` is the dotted path of the offending entry.
    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error(
        "price distribution N({mean}, {std}) produced no positive draw in {attempts} attempts"
    )]
    DegenerateDistribution { mean: f64, std: f64, attempts: u32 },

    #[error("incomplete grid for margin {margin}: {} missing cell(s), first {}", missing.len(), missing.first().map(String::as_str).unwrap_or("?"))]
    IncompleteGrid { margin: f64, missing: Vec<String> },

    #[error("no results to summarize")]
    EmptyInput,

    #[error("schema error at line {line}, column `{column}`: {reason}")]
    Schema {
        line: u64,
        column: String,
        reason: String,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, range: &'static str) -> Self {
        Error::Domain { name, value, range }
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
