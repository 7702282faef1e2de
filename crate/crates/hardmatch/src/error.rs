use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("invalid layout: {0}")]
    Layout(String),
    #[error("explicit-mode cap exceeded: {what} has {size} labels, cap is {cap}")]
    Cap { what: String, size: String, cap: u64 },
    #[error("count refused: {0}")]
    Count(String),
    #[error("index out of range: {0}")]
    Range(String),
    #[error("glue: {0}")]
    Glue(String),
    #[error("instance file: {0}")]
    Format(String),
    #[error("invalid matching: {0}")]
    Matching(String),
    #[error("harness: {0}")]
    Harness(String),
    #[error("family: {0}")]
    Family(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
