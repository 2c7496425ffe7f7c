//! Error taxonomy shared by every module.

/// Library-wide error type.
///
/// `Domain` marks inputs that violate a documented precondition, `Numerical`
/// marks iterations that failed to converge or produced non-finite values,
/// `DegenerateGeodesic` marks point pairs with no unique connecting geodesic,
/// and `Format` marks malformed binary files with the byte offset at which
/// decoding failed.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("degenerate geodesic: {0}")]
    DegenerateGeodesic(String),

    #[error("format error at byte {offset}: {msg}")]
    Format { offset: u64, msg: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub fn format(offset: u64, msg: impl Into<String>) -> Self {
        Error::Format { offset, msg: msg.into() }
    }
}
