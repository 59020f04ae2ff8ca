use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no position fixes supplied")]
    NoFixes,
    #[error("frame {frame} lies outside the crop window")]
    FrameOutsideCrop { frame: usize },
    #[error("segment bounding box {width:.1}x{height:.1} px exceeds the crop size")]
    BBoxTooLarge { width: f64, height: f64 },
    #[error("frame {0} is not covered by any segment")]
    UncoveredFrame(usize),
    #[error("timestamp {0} lies outside the estimate's time range")]
    OutOfRange(f64),
    #[error("trajectory too short to crop a training sample")]
    TooShort,
    #[error("linear system is singular")]
    Singular,
    #[error("flow backend: {0}")]
    Backend(String),
}
