use crate::domain::{PaperId, UserId};
use crate::ledger::LedgerError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown user {0}")]
    UnknownUser(UserId),

    #[error("a unified party needs at least one member")]
    EmptyParty,

    #[error("{what} = {value} is outside its domain {domain}")]
    OutOfDomain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("all competence-reputation weights are zero")]
    DegenerateWeights,

    #[error("paper {0} has no reviews")]
    NotReviewable(PaperId),

    #[error("invalid attack scenario: {0}")]
    InvalidScenario(String),

    #[error("need {needed} reviewers but only {available} are eligible")]
    InsufficientReviewers { needed: usize, available: usize },

    #[error("invalid venue: {0}")]
    InvalidVenue(String),

    #[error("{field}: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

impl Error {
    pub(crate) fn domain(what: &'static str, value: f64, domain: &'static str) -> Self {
        Error::OutOfDomain {
            what,
            value,
            domain,
        }
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
