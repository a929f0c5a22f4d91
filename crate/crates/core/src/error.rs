use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{field}[{index}] = {value}: {reason}")]
    InvalidEntry {
        field: &'static str,
        index: usize,
        value: f64,
        reason: &'static str,
    },

    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("no spectrum opportunity: every channel is busy with probability 1")]
    NoOpportunity,

    #[error("catalog C({n},{s}) has {count} groups, above the cap of {cap}; supply a restricted catalog")]
    CatalogTooLarge { n: usize, s: usize, count: u128, cap: u128 },

    #[error("enumeration needs {needed} outcomes, above the cap of {cap}")]
    EnumerationTooLarge { needed: u128, cap: u128 },

    #[error("operation requires a single-channel (S = 1) sensing scheme, got group size {0}")]
    NotSingleChannel(usize),

    #[error("channel index {index} out of range for {n} channels")]
    ChannelIndex { index: usize, n: usize },

    #[error("numerical failure in {context}: {detail}")]
    Numerical { context: &'static str, detail: String },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of an iterative or quadrature routine, as opposed
    /// to rejected input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical { .. })
    }
}
