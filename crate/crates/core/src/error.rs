use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid box [{x1}, {y1}, {x2}, {y2}]: {reason}")]
    InvalidBox {
        x1: f64,
        y1: f64,
        x2: f64,
        y2: f64,
        reason: &'static str,
    },

    #[error("degenerate box: {0}")]
    DegenerateBox(&'static str),

    #[error("invalid image size {width}x{height}")]
    InvalidImageSize { width: u32, height: u32 },

    #[error("invalid configuration: {field}: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("length mismatch for {what}: expected {expected}, got {actual}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("unbalanced marginals: supply sums to {supply}, demand sums to {demand}")]
    UnbalancedMarginals { supply: f64, demand: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("value out of range for {what}: {value}")]
    OutOfRange { what: &'static str, value: f64 },

    #[error("ground-truth index {index} out of range ({count} boxes)")]
    DanglingGt { index: usize, count: usize },

    #[error("duplicate ground-truth id {gt_id} in image {image_id}")]
    DuplicateGtId { image_id: u64, gt_id: u64 },

    #[error("{path}: {message}")]
    Parse { path: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
