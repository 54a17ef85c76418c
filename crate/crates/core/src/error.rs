use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Invalid configuration or input that violates a documented precondition.
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("empty vocabulary after pruning (triggered by {rule})")]
    EmptyVocabulary { rule: &'static str },

    #[error("empty document")]
    EmptyDocument,

    #[error("shape mismatch for {what}: expected {expected}, got {got}")]
    Shape {
        what: &'static str,
        expected: String,
        got: String,
    },

    /// NaN or infinity produced by a computation.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn shape(what: &'static str, expected: impl Into<String>, got: impl Into<String>) -> Self {
        Error::Shape {
            what,
            expected: expected.into(),
            got: got.into(),
        }
    }

    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_))
    }
}
