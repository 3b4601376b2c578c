//! Error type shared across the crate.

/// Crate-wide error enum. Variants map onto the failure modes of the numeric
/// kernels and the experiment harness; the CLI turns them into exit codes.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller-supplied value violates a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Matrix or vector shapes are incompatible.
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    /// A rank argument is out of range for the given shapes.
    #[error("invalid rank: {0}")]
    InvalidRank(String),

    /// A matrix that must be invertible (or positive definite) is not.
    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    /// No candidate arm subset with a nonsingular design could be found.
    #[error("degenerate arm set: {0}")]
    DegenerateArmSet(String),

    /// A configuration file field failed validation.
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// A simulated run aborted partway through.
    #[error("run failed: {0}")]
    RunFailure(String),
}

impl Error {
    pub fn config(field: &str, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
