use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("pixel ({x}, {y}) outside image of {width}x{height}")]
    PixelOutOfBounds { x: f64, y: f64, width: u32, height: u32 },
    #[error("cell ({col}, {row}) outside focal-plane grid of {width}x{height}")]
    CellOutOfBounds {
        col: f64,
        row: f64,
        width: u32,
        height: u32,
    },
    #[error("camera lies on the focal plane (distance {distance:e} m)")]
    DegeneratePlane { distance: f64 },
    #[error("covariance matrix is singular")]
    SingularCovariance,
    #[error("frame {index}: {source}")]
    Frame {
        index: u64,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
    #[error("image has {pixels} usable pixels, need at least {required}")]
    TooFewPixels { pixels: usize, required: usize },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: &'static str },
    #[error("shape mismatch: expected {expected_width}x{expected_height}, got {width}x{height}")]
    ShapeMismatch {
        expected_width: u32,
        expected_height: u32,
        width: u32,
        height: u32,
    },
    #[error("expected {expected} channel(s), got {got}")]
    ChannelMismatch { expected: usize, got: usize },
    #[error("camera at altitude {altitude} m is not above the canopy top at {canopy_top} m")]
    InvalidPose { altitude: f64, canopy_top: f64 },
    #[error("target footprint is not covered by the focal-plane grid")]
    TargetOutsideGrid,
    #[error("target footprint contains no cell center at {cell_size} m cells; use a finer grid")]
    TargetUnresolved { cell_size: f64 },
    #[error("sample value {0} outside the accumulator range")]
    ValueOutOfRange(f64),
    #[error("frame index {index} arrived after {previous}")]
    OutOfOrder { previous: u64, index: u64 },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: &'static str) -> Self {
        Error::InvalidParameter { name, reason }
    }

    pub(crate) fn in_frame(self, index: u64) -> Self {
        Error::Frame {
            index,
            source: alloc::boxed::Box::new(self),
        }
    }
}
