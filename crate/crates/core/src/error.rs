use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{name} = {value} is outside [{min}, {max}]")]
    Domain {
        name: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("{name} index {index} out of range (len {len})")]
    Index {
        name: &'static str,
        index: usize,
        len: usize,
    },

    #[error("degenerate array pattern: {0}")]
    Degenerate(String),

    #[error("all {0} candidate selections for subband {1} are already assigned")]
    Exhausted(u64, usize),

    #[error(
        "search space of {candidates} candidates exceeds the limit of {limit}; force to override"
    )]
    SearchTooLarge { candidates: u64, limit: u64 },

    #[error("{0}")]
    Mismatch(String),
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, min: f64, max: f64) -> Self {
        Error::Domain {
            name,
            value,
            min,
            max,
        }
    }
}
