//! Library-wide error type with stable diagnostic codes.
//!
//! Every variant maps to a distinct code (`E0xx`); the full table is in the
//! README. Codes are stable identifiers for scripts that parse CLI output.

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum CoreError {
    #[error("E001 syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("E002 unknown reference `{0}`")]
    UnknownReference(String),
    #[error("E003 `{name}` is bound to a {found}, expected a {expected}")]
    BindingType {
        name: String,
        expected: &'static str,
        found: &'static str,
    },
    #[error("E004 dimension mismatch: {0}")]
    Dimension(String),
    #[error("E005 component index {k} exceeds order {order}")]
    OrderRange { k: usize, order: usize },
    #[error("E006 carrier mismatch: {0}")]
    Carrier(String),
    #[error("E007 Leibniz certificate failed: {0}")]
    LeibnizCertificate(String),
    #[error("E008 well-definedness certificate failed: {0}")]
    WellDefinedness(String),
    #[error("E009 conversion self-check failed: {0}")]
    ConversionCheck(String),
    #[error("E010 algebra law violation: {0}")]
    AlgebraLaw(String),
    #[error("E011 ideal is not in the filter: {0}")]
    NotInFilter(String),
    #[error("E012 invariance witness search exhausted: {0}")]
    WitnessExhausted(String),
    #[error("E013 extension prerequisite violated: {0}")]
    ExtensionPrerequisite(String),
    #[error("E014 invalid construction argument: {0}")]
    InvalidArgument(String),
    #[error("E015 malformed literal: {0}")]
    MalformedLiteral(String),
}

impl CoreError {
    /// The stable diagnostic code for this error.
    pub fn code(&self) -> &'static str {
        match self {
            CoreError::Syntax { .. } => "E001",
            CoreError::UnknownReference(_) => "E002",
            CoreError::BindingType { .. } => "E003",
            CoreError::Dimension(_) => "E004",
            CoreError::OrderRange { .. } => "E005",
            CoreError::Carrier(_) => "E006",
            CoreError::LeibnizCertificate(_) => "E007",
            CoreError::WellDefinedness(_) => "E008",
            CoreError::ConversionCheck(_) => "E009",
            CoreError::AlgebraLaw(_) => "E010",
            CoreError::NotInFilter(_) => "E011",
            CoreError::WitnessExhausted(_) => "E012",
            CoreError::ExtensionPrerequisite(_) => "E013",
            CoreError::InvalidArgument(_) => "E014",
            CoreError::MalformedLiteral(_) => "E015",
        }
    }
}
