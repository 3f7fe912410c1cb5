use thiserror::Error;

/// Errors raised by the numerical core and the file-format layer.
#[derive(Debug, Error)]
pub enum CscError {
    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("data length {len} does not match {height}x{width}")]
    BadLength {
        len: usize,
        height: usize,
        width: usize,
    },

    #[error("inverse transform has imaginary residue {residue:e} (relative {relative:e})")]
    NonSymmetricSpectrum { residue: f64, relative: f64 },

    #[error("filter {fh}x{fw} does not fit in {height}x{width} grid")]
    FilterTooLarge {
        fh: usize,
        fw: usize,
        height: usize,
        width: usize,
    },

    #[error("negative threshold {0}")]
    NegativeThreshold(f64),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("diagonal entry {index} is {value}, must be positive")]
    NonpositiveDiagonal { index: usize, value: f64 },

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("patch size {patch} exceeds image {height}x{width}")]
    PatchTooLarge {
        patch: usize,
        height: usize,
        width: usize,
    },

    #[error("pixel ({row}, {col}) is not covered by any patch")]
    CoverageZero { row: usize, col: usize },

    #[error("parameter {name} must be positive, got {value}")]
    NonpositiveParameter { name: &'static str, value: f64 },

    #[error("malformed file {path}: {reason}")]
    Format { path: String, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, CscError>;
