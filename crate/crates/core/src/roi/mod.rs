//! Headset region of interest: binary masks (ingested or from a contrast
//! segmenter) and the geometric filters that decide whether a frame is usable.
//! Frames whose mask fails the filters become missing observations.

mod geometry;
mod mask;
mod segment;

pub use geometry::{
    convex_hull, mask_geometry, polygon_area, validate_mask, MaskQuality, ASPECT_RANGE,
    MIN_SOLIDITY,
};
pub use mask::{Mask, MaskSource};
pub use segment::{segment_classical, SegmentConfig};

use crate::frame_store::SessionRecording;

/// Mask for frame `index`: the ingested mask when present, otherwise the
/// classical segmenter against the joined ambient reading. Returns `None` when
/// neither is available (no ingested mask and no ambient sample).
pub fn frame_mask(rec: &SessionRecording, index: usize, config: &SegmentConfig) -> Option<Mask> {
    if let Some(m) = &rec.masks[index] {
        return Some(m.clone());
    }
    let ambient = rec.env[index]?.ambient_c;
    Some(segment_classical(&rec.frames[index], ambient, config))
}
