use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid modulus q = {0}, need q >= 2")]
    InvalidModulus(i64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid codebook: {0}")]
    InvalidCodebook(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("enumeration budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("unknown construction `{0}`")]
    UnknownConstruction(String),

    #[error("non-finite input")]
    NonFinite,

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
