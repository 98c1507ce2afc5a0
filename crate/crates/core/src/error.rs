use thiserror::Error;

#[derive(Debug, Error)]
pub enum TeleopError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: String, reason: String },

    #[error("controller synthesis failed: {0}")]
    Synthesis(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("log error: {0}")]
    Log(String),

    #[error("wire protocol error: {0}")]
    Wire(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, TeleopError>;

pub(crate) fn ensure_finite(name: &'static str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(TeleopError::NonFinite(name))
    }
}
