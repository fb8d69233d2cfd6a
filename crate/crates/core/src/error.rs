use thiserror::Error;

/// Errors produced anywhere in the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter set violates one of its invariants.
    #[error("configuration error: {0}")]
    Config(String),

    /// An input does not have the shape or content an operation requires.
    #[error("input error: {0}")]
    Input(String),

    /// A binary file could not be decoded.
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: u64, message: String },

    /// Training diverged or produced non-finite values.
    #[error("training error at round {round:?}, step {step}: {message}")]
    Training {
        round: Option<usize>,
        step: usize,
        message: String,
    },

    /// A closed-form bound was evaluated outside its region of validity.
    #[error("validity error: {0}")]
    Validity(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
