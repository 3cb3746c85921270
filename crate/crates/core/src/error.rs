use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid direction: sin²α + sin²β = {sum_sq:.6} > 1 (α = {azimuth_deg:.3}°, β = {elevation_deg:.3}°)")]
    InvalidDirection {
        azimuth_deg: f64,
        elevation_deg: f64,
        sum_sq: f64,
    },
    #[error("numeric domain error: {0}")]
    NumericDomain(String),
    #[error("invalid imaging grid: {0}")]
    InvalidGrid(String),
    #[error("sampling rate {fs_hz} Hz is below 4 × {fc_hz} Hz")]
    SamplingRate { fs_hz: f64, fc_hz: f64 },
    #[error("degenerate pulse: {0}")]
    DegeneratePulse(String),
    #[error("record too short: {0}")]
    Truncation(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("range {range_m} m (t = {time_s} s) lies outside the record [{start_s}, {end_s}] s")]
    OutOfRecord {
        range_m: f64,
        time_s: f64,
        start_s: f64,
        end_s: f64,
    },
    #[error("pattern does not fall to -3 dB on both sides of the peak within the span")]
    SpanTooNarrow,
    #[error("pattern has no side lobe inside the span")]
    NoSidelobe,
    #[error("undefined ratio: {0}")]
    UndefinedRatio(String),
    #[error("degenerate clustering: {0}")]
    DegenerateClustering(String),
    #[error("unsupported method: {0}")]
    UnsupportedMethod(String),
    #[error("operation count overflow in {0}")]
    Overflow(&'static str),
    #[error("nondeterministic output: {0}")]
    Nondeterministic(String),

    #[error("bad magic at byte 0: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported format version {found} at byte 4 (expected {expected})")]
    VersionMismatch { expected: u16, found: u16 },
    #[error("truncated payload at byte {offset}: expected {expected} bytes, found {actual}")]
    TruncatedPayload {
        offset: u64,
        expected: u64,
        actual: u64,
    },
    #[error("{extra} unexpected trailing bytes after byte {offset}")]
    TrailingBytes { offset: u64, extra: u64 },
    #[error("malformed header at byte {offset}: {reason}")]
    MalformedHeader { offset: u64, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
