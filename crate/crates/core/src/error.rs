use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scene spec: {0}")]
    InvalidSpec(String),
    #[error("cannot place stations: {0}")]
    PlacementFailure(String),
    #[error("category {0} does not occur in the scene")]
    MissingCategory(u32),
    #[error("position ({x}, {y}) lies outside the scene footprint")]
    OutOfBounds { x: f64, y: f64 },
    #[error("invalid N={n} for K={k}")]
    InvalidN { n: usize, k: usize },
    #[error("unknown landscape category {0}")]
    InvalidCategory(u32),
    #[error("dataset holds a single class, nothing to balance")]
    NothingToBalance,
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("impurity of an empty node is undefined")]
    InvalidNode,
    #[error("expected {expected} features, got {got}")]
    InvalidFeatures { expected: usize, got: usize },
    #[error("cannot decode model: {0}")]
    DecodeFailure(String),
    #[error("class {0} is not part of the confusion matrix")]
    InvalidClass(u32),
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("malformed file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
