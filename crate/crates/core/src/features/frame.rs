use serde::{Deserialize, Serialize};

use super::{cell_stats, spatial_gradient, GridSpec};
use crate::frame_store::{
    RadiometricFrame, SensorSample, SessionManifest, SessionRecording,
};
use crate::roi::{frame_mask, mask_geometry, Mask, SegmentConfig};

/// Per-frame channels, in feature order.
pub const CHANNELS: [&str; 5] = ["min", "max", "mean", "std", "grad"];
pub const CH_MIN: usize = 0;
pub const CH_MAX: usize = 1;
pub const CH_MEAN: usize = 2;
pub const CH_STD: usize = 3;
pub const CH_GRAD: usize = 4;

/// Grid statistics and gradients of one valid frame; NaN marks missing cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameFeatures {
    pub timestamp_ms: i64,
    pub n: usize,
    /// `channels[c][i * n + j]` for channel `c` in [`CHANNELS`] order.
    pub channels: [Vec<f64>; 5],
}

impl FrameFeatures {
    pub fn channel(&self, c: usize) -> &[f64] {
        &self.channels[c]
    }

    pub fn present_cells(&self) -> usize {
        self.channels[CH_MEAN].iter().filter(|v| !v.is_nan()).count()
    }
}

/// Features of one frame under `mask`, or `None` when the mask fails the
/// geometric filters (a missing observation).
pub fn frame_features(frame: &RadiometricFrame, mask: &Mask, grid: &GridSpec) -> Option<FrameFeatures> {
    let component = mask.largest_component();
    if !mask_geometry(&component).valid {
        return None;
    }
    let stats = cell_stats(frame, &component, grid);
    let pick = |f: fn(&super::CellStats) -> f64| stats.iter().map(f).collect::<Vec<f64>>();
    let mean = pick(|s| s.mean);
    let grad = spatial_gradient(&mean, grid.n);
    Some(FrameFeatures {
        timestamp_ms: frame.timestamp_ms(),
        n: grid.n,
        channels: [pick(|s| s.min), pick(|s| s.max), mean, pick(|s| s.std), grad],
    })
}

/// Frame-level thermal signature of a whole session: one slot per frame,
/// `None` where the frame is missing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionFeatures {
    pub manifest: SessionManifest,
    pub n: usize,
    pub timestamps: Vec<i64>,
    pub frames: Vec<Option<FrameFeatures>>,
    pub env: Vec<Option<SensorSample>>,
}

impl SessionFeatures {
    pub fn new(manifest: SessionManifest, n: usize) -> Self {
        Self {
            manifest,
            n,
            timestamps: Vec::new(),
            frames: Vec::new(),
            env: Vec::new(),
        }
    }

    /// Append one frame in time order.
    pub fn push(&mut self, timestamp_ms: i64, features: Option<FrameFeatures>, env: Option<SensorSample>) {
        self.timestamps.push(timestamp_ms);
        self.frames.push(features);
        self.env.push(env);
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn missing(&self) -> usize {
        self.frames.iter().filter(|f| f.is_none()).count()
    }

    /// Session-long series of channel `ch` at cell `k`, NaN where missing.
    pub fn cell_series(&self, ch: usize, k: usize) -> Vec<f64> {
        self.frames
            .iter()
            .map(|f| f.as_ref().map_or(f64::NAN, |f| f.channels[ch][k]))
            .collect()
    }

    /// Extract every frame of a recording: ingested masks take precedence over
    /// the classical segmenter; frames without a usable mask are missing.
    pub fn from_recording(rec: &SessionRecording, grid: &GridSpec, seg: &SegmentConfig) -> Self {
        let mut out = Self::new(rec.manifest.clone(), grid.n);
        for (i, frame) in rec.frames.iter().enumerate() {
            let features = frame_mask(rec, i, seg).and_then(|m| frame_features(frame, &m, grid));
            out.push(frame.timestamp_ms(), features, rec.env[i]);
        }
        out
    }
}
