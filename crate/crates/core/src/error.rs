use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("velodyne file truncated: {len} bytes is not a multiple of 16, trailing record starts at offset {offset}")]
    TruncatedVelodyne { len: u64, offset: u64 },

    #[error("invalid point record {index}: {reason}")]
    InvalidRecord { index: usize, reason: String },

    #[error("depth image format: {0}")]
    DepthFormat(String),

    #[error("depth {depth} m at pixel ({u}, {v}) cannot be encoded as 16-bit depth")]
    DepthOutOfRange { u: usize, v: usize, depth: f64 },

    #[error("calibration key `{0}` not found")]
    MissingKey(String),

    #[error("calibration line {line}: {message}")]
    CalibrationParse { line: usize, message: String },

    #[error("invalid camera model: {0}")]
    InvalidCamera(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid angular bin spec: {0}")]
    InvalidBinSpec(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("depth map has no valid pixels")]
    EmptyDepth,

    #[error("no pixel is valid in both prediction and ground truth")]
    NoSupervisedPixels,

    #[error("zero-norm point at index {0}")]
    ZeroNormPoint(usize),

    #[error("bin {0} is not stored in the occupancy tensor")]
    UnknownBin(usize),

    #[error("index {index} out of range for {len} points")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("grid mismatch between prediction and target")]
    GridMismatch,

    #[error("non-finite loss {value} {context}")]
    NonFiniteLoss { value: f64, context: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the filesystem rather than of the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
