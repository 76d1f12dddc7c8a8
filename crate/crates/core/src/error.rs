use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("observation {0} lies outside the support of both hypotheses")]
    InvalidObservation(f64),

    #[error("{what} is not available for {model} models")]
    Unsupported {
        what: &'static str,
        model: &'static str,
    },

    #[error("trial did not terminate within {cap} samples")]
    NonTermination { cap: u64 },

    #[error("empty sweep grid")]
    EmptyGrid,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
