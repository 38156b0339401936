use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid physical input (non-positive distance, bad angle range, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid configuration value; carries a field-level message.
    #[error("configuration error: {0}")]
    Config(String),

    /// Rejection sampling could not find acceptable points.
    #[error("sampling error: {0}")]
    Sampling(String),

    /// Trajectory integration produced a non-finite state.
    #[error("integration error at z = {z} m: {message}")]
    Integration { z: f64, message: String },

    /// Calibration against a degenerate reference rate.
    #[error("calibration error: {0}")]
    Calibration(String),

    /// Run aggregation over inconsistent records.
    #[error("aggregation error: {0}")]
    Aggregation(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Config(e.to_string())
    }
}
