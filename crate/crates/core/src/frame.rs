use crate::geometry::Pose;
use crate::raster::Raster;

/// One pose-tagged capture. `index` is monotonic within a sequence.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Frame {
    pub index: u64,
    pub pose: Pose,
    pub image: Raster<f64>,
}

impl Frame {
    pub fn new(index: u64, pose: Pose, image: Raster<f64>) -> Self {
        Frame { index, pose, image }
    }
}
