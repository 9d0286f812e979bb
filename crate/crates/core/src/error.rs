use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("conditioning on null event: context {context:?} has probability 0")]
    NullEvent { context: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no continuation mass after prefix {prefix:?} (cap or fuel too small)")]
    NoContinuationMass { prefix: String },

    #[error("prefix of length {len} exceeds table depth {depth}")]
    BeyondDepth { len: usize, depth: usize },

    #[error("generator {name} produced no bit at index {index}")]
    GeneratorExhausted { name: String, index: usize },

    #[error("mixture class is empty")]
    EmptyClass,

    #[error("invalid class: {0}")]
    InvalidClass(String),

    #[error("unknown component {0:?}")]
    UnknownComponent(String),

    #[error(
        "horizon {horizon} exceeds the exact-enumeration cap {cap}; use monte_carlo_expectations"
    )]
    HorizonOverCap { horizon: usize, cap: usize },

    #[error("bounds require exact expectations")]
    RequiresExact,

    #[error("series is not monotone: {0}")]
    NonMonotone(String),

    #[error("internal consistency check failed: {0}")]
    Inconsistent(String),

    #[error("inadmissible constants for {inequality}: {detail}")]
    Inadmissible { inequality: String, detail: String },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("partial dealer rule: {0}")]
    PartialRule(String),

    #[error("unwinnable game: {0}")]
    Unwinnable(String),

    #[error("serialization: {0}")]
    Serialization(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}
