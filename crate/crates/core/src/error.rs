use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument outside the operation's mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// Inconsistent or incomplete configuration (norm modes, missing data).
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("elements or maps belong to different algebras: {0}")]
    ParentMismatch(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("no library diagonal for this algebra")]
    NoLibraryDiagonal,
    /// A theorem-checker precondition failed; the check was not run.
    #[error("precondition failed in {check}: {reason}")]
    Precondition { check: &'static str, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn precondition<T>(check: &'static str, reason: impl Into<String>) -> Result<T> {
    Err(Error::Precondition {
        check,
        reason: reason.into(),
    })
}
