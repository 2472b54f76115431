use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("field: {0}")]
    Field(String),
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    Length { expected: usize, got: usize },
    #[error("decoding failed: {0}")]
    Decode(String),
    #[error("empty input")]
    EmptyInput,
    #[error("barcode codebook: {0}")]
    Codebook(String),
    #[error("only {found} admissible candidates, {wanted} requested")]
    Shortfall { wanted: usize, found: usize },
    #[error("no valid trellis path")]
    NoValidPath,
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
