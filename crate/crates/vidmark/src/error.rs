use thiserror::Error;

/// Unified error type for the whole toolkit.
///
/// Variants are grouped roughly by subsystem; the bench harness maps them to
/// process exit codes (config problems -> 2, missing external codec in strict
/// mode -> 3).
#[derive(Debug, Error)]
pub enum Error {
    // -- clip handling and I/O ------------------------------------------------
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("bad clip dimensions: {0}")]
    BadDims(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    // -- wavelet transform ----------------------------------------------------
    #[error("bad transform shape: {0}")]
    BadShape(String),

    #[error("bad subband address: {0}")]
    BadBandCode(String),

    // -- watermark embedding / extraction ------------------------------------
    #[error("payload too large: need {needed} coefficient slots, have {capacity}")]
    PayloadTooLarge { needed: usize, capacity: usize },

    #[error("key/clip mismatch: key is for {key_dims:?}, clip is {clip_dims:?}")]
    KeyClipMismatch {
        key_dims: (usize, usize, usize),
        clip_dims: (usize, usize, usize),
    },

    // -- distortion engine ----------------------------------------------------
    #[error("bad distortion parameter: {0}")]
    BadParam(String),

    #[error("external codec unavailable: {0}")]
    CodecUnavailable(String),

    // -- detector -------------------------------------------------------------
    #[error("clip too short: {len} frames, detection window needs {window}")]
    ClipTooShort { len: usize, window: usize },

    #[error("not enough calibration samples: got {got}, need at least {need}")]
    InsufficientSamples { got: usize, need: usize },

    #[error("bad composite geometry: {0}")]
    BadGeometry(String),

    // -- bench harness --------------------------------------------------------
    #[error("invalid config: {0}")]
    ConfigInvalid(String),

    #[error("corpus is empty")]
    CorpusEmpty,
}

pub type Result<T> = std::result::Result<T, Error>;
