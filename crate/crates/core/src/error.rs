use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Shapes or channel counts do not line up.
    #[error("dimension error: {0}")]
    Dimension(String),
    /// A configuration value is outside its domain.
    #[error("config error: {0}")]
    Config(String),
    /// A partition cannot be laid out evenly.
    #[error("partition error: {0}")]
    Partition(String),
    /// An API precondition was violated by the caller.
    #[error("usage error: {0}")]
    Usage(String),
    /// Input data (waveforms, datasets) is unusable.
    #[error("input error: {0}")]
    Input(String),
}

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$kind(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
