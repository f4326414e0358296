use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure classes surfaced by every stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid options, generator specs or predictor configuration.
    #[error("config error: {0}")]
    Config(String),
    /// Token ids, ranks or varints that cannot belong to a valid stream.
    #[error("malformed stream: {0}")]
    MalformedStream(String),
    /// Checksum, length or gzip framing mismatch.
    #[error("integrity error: {0}")]
    Integrity(String),
    /// Container magic, version or layout problems.
    #[error("format error: {0}")]
    Format(String),
    /// A predictor was driven outside its contract (e.g. token out of range).
    #[error("predictor contract violation: {0}")]
    Contract(String),
    /// External predictor process misbehaved.
    #[error("predictor protocol error: {0}")]
    Protocol(String),
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}
