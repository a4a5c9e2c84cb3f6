use thiserror::Error;

#[derive(Debug, Error)]
pub enum PexError {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("feasible set is empty")]
    Infeasible,

    #[error("no strictly feasible policy exists (every policy makes some constraint tight)")]
    ZeroSlack,

    #[error("arm count {k} exceeds the enumeration bound of {max}")]
    TooManyArms { k: usize, max: usize },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown algorithm `{0}`")]
    UnknownAlgorithm(String),

    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("unknown preset `{name}` (available: {available})")]
    UnknownPreset { name: String, available: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
}

impl PexError {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        PexError::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad user input rather than the filesystem.
    pub fn is_validation(&self) -> bool {
        !matches!(self, PexError::Io { .. } | PexError::Csv { .. })
    }
}

pub type Result<T, E = PexError> = std::result::Result<T, E>;
