use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid similarity map: {0}")]
    InvalidMap(String),

    #[error("invalid random IFS: {0}")]
    InvalidRifs(String),

    #[error("RIFS is not non-extinguishing: expected arity {expected_arity} must exceed 1")]
    Extinguishing { expected_arity: f64 },

    #[error("configuration error at `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("realisation depth {available} is insufficient, depth {required} is required")]
    InsufficientDepth { required: usize, available: usize },

    #[error("subcritical percolation: p = {p} must exceed the threshold {threshold}")]
    Subcritical { p: f64, threshold: f64 },

    #[error("no surviving trials: {0}")]
    NoSurvivors(String),

    #[error("only {usable} usable scales (at least 3 needed); limited by {limit}")]
    TooFewScales { usable: usize, limit: &'static str },

    #[error("resource budget exceeded: {requested} requested, budget is {budget}")]
    Budget { requested: u64, budget: u64 },

    #[error("population overflow beyond 2^63 at generation {generation}")]
    Overflow { generation: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    pub fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }

    /// True for errors a user fixes by editing the configuration.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config { .. }
                | Error::InvalidMap(_)
                | Error::InvalidRifs(_)
                | Error::Extinguishing { .. }
                | Error::Argument(_)
                | Error::InsufficientDepth { .. }
                | Error::Subcritical { .. }
                | Error::TooFewScales { .. }
                | Error::Unsupported(_)
        )
    }

    pub fn is_budget(&self) -> bool {
        matches!(self, Error::Budget { .. } | Error::Overflow { .. })
    }
}
