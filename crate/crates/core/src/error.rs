use thiserror::Error;

use crate::expr::{DomainError, ParseError};

#[derive(Debug, Error)]
pub enum Error {
    #[error("sampling exhausted: {0}")]
    SamplingExhausted(DomainError),
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
    #[error("chart mismatch: {0}")]
    ChartMismatch(String),
    #[error("not a control system: {0}")]
    NotAControlSystem(String),
    #[error("relative degree undefined: {0}")]
    RelativeDegreeUndefined(String),
    #[error("invariantization did not stabilize within {0} steps")]
    NotInvariant(usize),
    #[error("not a regular zero dynamics foliation: {0}")]
    NotRegular(String),
    #[error("not representable by exact generators: {0}")]
    NotRepresentable(String),
    #[error("no input can be replaced: {0}")]
    NoValidReplacement(String),
    #[error("not an extension: {0}")]
    NotAnExtension(String),
    #[error("not decomposable: {0}")]
    NotDecomposable(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// True when the failure comes from the probabilistic machinery rather
    /// than from the input.
    pub fn is_genericity_failure(&self) -> bool {
        matches!(self, Error::SamplingExhausted(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
