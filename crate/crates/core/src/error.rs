//! Error type shared by all modules of the crate.

/// Errors raised while parsing, encoding, matching, or persisting features.
#[derive(thiserror::Error, Debug)]
pub enum Error {
    /// The stream is JPEG but uses a coding process outside the baseline
    /// subset (progressive, arithmetic coding, 12-bit precision, more than
    /// three components, ...).
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    /// The stream violates the baseline JPEG syntax or its entropy data is
    /// damaged or truncated.
    #[error("corrupt stream: {0}")]
    CorruptStream(String),

    /// Image width or height is zero or exceeds the 16-bit frame header.
    #[error("invalid image dimensions {width}x{height}")]
    DimensionOverflow { width: u32, height: u32 },

    /// Quality factor outside `1..=100`.
    #[error("quality factor {0} outside 1..=100")]
    QfOutOfRange(u8),

    /// The area resizer and the feature estimator only shrink.
    #[error("upscaling not supported: {from_w}x{from_h} -> {to_w}x{to_h}")]
    UpscaleUnsupported {
        from_w: u32,
        from_h: u32,
        to_w: u32,
        to_h: u32,
    },

    /// Two sequences that must agree in length (or a vector and its declared
    /// dimensions) do not.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// An enrollment id is already present in the store.
    #[error("duplicate image id {0:?}")]
    DuplicateId(String),

    /// No record with the requested image id.
    #[error("no record with image id {0:?}")]
    NotFound(String),

    /// Underlying filesystem failure.
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),

    /// A store or record carries a format version this build does not know.
    #[error("unsupported store format: {0}")]
    VersionMismatch(String),

    /// A record file exists but its contents are inconsistent.
    #[error("corrupt record: {0}")]
    CorruptRecord(String),

    /// A parameter value outside its documented domain (zero `delta`,
    /// an image id with control characters, ...).
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
}

pub type Result<T> = std::result::Result<T, Error>;
