use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("maturity {maturity} precedes valuation time {t}")]
    MaturityInPast { t: f64, maturity: f64 },

    #[error("no initial factor-2 value supplied for age {0}")]
    MissingY2(u32),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("missing mortality cell age={age} year={year}")]
    MissingCell { age: u32, year: i32 },

    #[error("time {0} is not on the simulation grid")]
    OffGrid(f64),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown key `{key}` on line {line}")]
    UnknownKey { key: String, line: usize },

    #[error("{0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
