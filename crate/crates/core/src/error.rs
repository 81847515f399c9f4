use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied parameter is outside its valid range.
    #[error("invalid parameter: {0}")]
    Param(String),

    /// Tensor, kernel or layer dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Input time steps do not match what the layer expects.
    #[error("time-step mismatch: layer expects in_T={expected}, got {actual}")]
    TimeStep { expected: usize, actual: usize },

    /// Encoded data failed validation while decoding.
    #[error("corrupt data: {0}")]
    Corrupt(String),

    /// A metric is undefined for the given input.
    #[error("undefined metric: {0}")]
    Metric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Param(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn corrupt(msg: impl Into<String>) -> Self {
        Error::Corrupt(msg.into())
    }
}
