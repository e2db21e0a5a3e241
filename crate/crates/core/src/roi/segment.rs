use serde::{Deserialize, Serialize};

use super::{Mask, MaskSource};
use crate::frame_store::RadiometricFrame;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentConfig {
    /// Minimum temperature above ambient for a foreground pixel, °C.
    pub contrast_c: f64,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self { contrast_c: 3.0 }
    }
}

/// 3x3 min (erode) or max (dilate) filter. Out-of-frame neighbours are ignored.
fn filter3(bits: &[bool], h: usize, w: usize, dilate: bool) -> Vec<bool> {
    let mut out = vec![false; bits.len()];
    for r in 0..h {
        let rr = r.saturating_sub(1)..=(r + 1).min(h - 1);
        for c in 0..w {
            let cc = c.saturating_sub(1)..=(c + 1).min(w - 1);
            let mut acc = !dilate;
            'win: for nr in rr.clone() {
                for nc in cc.clone() {
                    let b = bits[nr * w + nc];
                    if dilate && b {
                        acc = true;
                        break 'win;
                    }
                    if !dilate && !b {
                        acc = false;
                        break 'win;
                    }
                }
            }
            out[r * w + c] = acc;
        }
    }
    out
}

/// Contrast threshold against ambient, morphological open then close, then the
/// largest 4-connected component.
pub fn segment_classical(frame: &RadiometricFrame, ambient_c: f64, config: &SegmentConfig) -> Mask {
    let (h, w) = (frame.height(), frame.width());
    let raw: Vec<bool> = frame
        .temps()
        .iter()
        .map(|&t| t - ambient_c >= config.contrast_c)
        .collect();
    let opened = filter3(&filter3(&raw, h, w, false), h, w, true);
    let closed = filter3(&filter3(&opened, h, w, true), h, w, false);
    Mask::new(h, w, closed, MaskSource::ClassicalSegmenter).largest_component()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame_with(h: usize, w: usize, base: f64, blobs: &[(usize, usize, usize, usize, f64)]) -> RadiometricFrame {
        let mut temps = vec![base; h * w];
        for &(r0, c0, r1, c1, dt) in blobs {
            for r in r0..r1 {
                for c in c0..c1 {
                    temps[r * w + c] += dt;
                }
            }
        }
        RadiometricFrame::new(0, 0, h, w, temps).unwrap()
    }

    #[test]
    fn constant_frame_gives_empty_mask() {
        let f = RadiometricFrame::constant(0, 48, 64, 21.0).unwrap();
        assert_eq!(segment_classical(&f, 21.0, &SegmentConfig::default()).area(), 0);
    }

    #[test]
    fn warm_rectangle_is_recovered_exactly() {
        let f = frame_with(48, 64, 20.0, &[(10, 12, 30, 50, 8.0)]);
        let m = segment_classical(&f, 20.0, &SegmentConfig::default());
        assert_eq!(m.bits(), Mask::rect(48, 64, 10, 12, 30, 50).bits());
        assert_eq!(m.source(), MaskSource::ClassicalSegmenter);
    }

    #[test]
    fn keeps_only_the_largest_blob() {
        // 20x20 = 400 px and 5x10 = 50 px
        let f = frame_with(64, 64, 20.0, &[(2, 2, 22, 22, 6.0), (40, 40, 45, 50, 6.0)]);
        let m = segment_classical(&f, 20.0, &SegmentConfig::default());
        assert_eq!(m.area(), 400);
        assert!(!m.get(42, 45));
    }

    #[test]
    fn rectangle_touching_frame_edge_survives() {
        let f = frame_with(32, 32, 20.0, &[(0, 0, 10, 20, 5.0)]);
        let m = segment_classical(&f, 20.0, &SegmentConfig::default());
        assert_eq!(m.area(), 200);
    }
}
