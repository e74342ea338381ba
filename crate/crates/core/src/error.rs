use thiserror::Error;

/// Errors raised across the crate.
///
/// `Contract` covers violated preconditions of an operation, `Config` covers
/// bad user input (files, flags, dataset shape). `Internal` is reserved for
/// post-condition checks that should never fail.
#[derive(Debug, Error)]
pub enum Error {
    #[error("capacity: {0}")]
    Capacity(String),

    #[error("index: {0}")]
    Index(String),

    #[error("contract: {0}")]
    Contract(String),

    #[error("config: {0}")]
    Config(String),

    #[error("internal: {0}")]
    Internal(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
