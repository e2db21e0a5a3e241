use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{FrameError, Phase, RadiometricFrame, SensorSample, SessionManifest};
use crate::roi::Mask;

/// Default nearest-neighbour join tolerance between a frame and a sensor sample.
pub const DEFAULT_TOLERANCE_MS: i64 = 500;

/// Frames of one session joined to their environmental readings.
#[derive(Debug, Clone)]
pub struct SessionRecording {
    pub manifest: SessionManifest,
    pub frames: Vec<RadiometricFrame>,
    /// Joined sensor sample per frame; `None` for frames in `gaps`.
    pub env: Vec<Option<SensorSample>>,
    pub gaps: BTreeSet<usize>,
    /// Externally supplied masks, one slot per frame.
    pub masks: Vec<Option<Mask>>,
}

impl SessionRecording {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn timestamps(&self) -> Vec<i64> {
        self.frames.iter().map(|f| f.timestamp_ms()).collect()
    }

    /// Attach ingested masks, keyed by frame timestamp.
    pub fn with_masks(mut self, masks: Vec<(i64, Mask)>) -> Self {
        for (ts, mask) in masks {
            if let Ok(i) = self.frames.binary_search_by_key(&ts, |f| f.timestamp_ms()) {
                self.masks[i] = Some(mask);
            }
        }
        self
    }
}

/// Index of the sample nearest to `t`; equidistant candidates resolve to the earlier one.
pub fn nearest_sample(samples: &[SensorSample], t: i64) -> Option<usize> {
    if samples.is_empty() {
        return None;
    }
    let after = samples.partition_point(|s| s.timestamp_ms < t);
    let mut best = None;
    let mut best_dist = i64::MAX;
    for i in [after.checked_sub(1), Some(after)].into_iter().flatten() {
        if let Some(s) = samples.get(i) {
            let d = (s.timestamp_ms - t).abs();
            if d < best_dist {
                best_dist = d;
                best = Some(i);
            }
        }
    }
    best
}

/// Join every frame to its nearest sensor sample; frames with no sample within
/// `tolerance_ms` are recorded as gaps. Frame indices are renumbered in order.
pub fn align_session(
    frames: Vec<RadiometricFrame>,
    sensor_log: &[SensorSample],
    manifest: SessionManifest,
    tolerance_ms: i64,
) -> Result<SessionRecording, FrameError> {
    if frames.is_empty() || sensor_log.is_empty() {
        return Err(FrameError::EmptySession {
            session: manifest.session_id.clone(),
        });
    }
    for (i, pair) in frames.windows(2).enumerate() {
        if pair[1].timestamp_ms() <= pair[0].timestamp_ms() {
            return Err(FrameError::Order {
                session: manifest.session_id.clone(),
                index: i + 1,
            });
        }
    }
    let mut env = Vec::with_capacity(frames.len());
    let mut gaps = BTreeSet::new();
    let frames: Vec<RadiometricFrame> = frames
        .into_iter()
        .enumerate()
        .map(|(i, f)| f.with_frame_index(i))
        .collect();
    for (i, frame) in frames.iter().enumerate() {
        let t = frame.timestamp_ms();
        match nearest_sample(sensor_log, t) {
            Some(k) if (sensor_log[k].timestamp_ms - t).abs() <= tolerance_ms => {
                env.push(Some(sensor_log[k]))
            }
            _ => {
                env.push(None);
                gaps.insert(i);
            }
        }
    }
    let masks = vec![None; frames.len()];
    Ok(SessionRecording {
        manifest,
        frames,
        env,
        gaps,
        masks,
    })
}

/// A fixed-duration contiguous run of frames from one session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationWindow {
    pub session_id: String,
    pub start_index: usize,
    /// Window length in frames (= seconds at 1 Hz).
    pub len: usize,
    pub label: String,
}

impl ObservationWindow {
    pub fn frame_range(&self) -> std::ops::Range<usize> {
        self.start_index..self.start_index + self.len
    }
}

fn seconds_to_frames(seconds: u32, rate_hz: f64) -> usize {
    ((seconds as f64) * rate_hz).round().max(1.0) as usize
}

/// Slide windows over `[range.start, range.end)`; the trailing partial window is dropped.
pub fn window_range(
    manifest: &SessionManifest,
    range: std::ops::Range<usize>,
    window_frames: usize,
    stride_frames: usize,
) -> Vec<ObservationWindow> {
    assert!(window_frames >= 1 && stride_frames >= 1, "window and stride must be positive");
    let mut out = Vec::new();
    let mut start = range.start;
    while start + window_frames <= range.end {
        out.push(ObservationWindow {
            session_id: manifest.session_id.clone(),
            start_index: start,
            len: window_frames,
            label: manifest.app_label.clone(),
        });
        start += stride_frames;
    }
    out
}

/// Windows over the whole session. A window longer than the session yields nothing.
pub fn window_session(
    rec: &SessionRecording,
    window_s: u32,
    stride_s: u32,
) -> Vec<ObservationWindow> {
    let rate = rec.manifest.sample_rate_hz;
    window_range(
        &rec.manifest,
        0..rec.len(),
        seconds_to_frames(window_s, rate),
        seconds_to_frames(stride_s, rate),
    )
}

/// Windows restricted to frames whose phase is in `phases`. Each maximal run of
/// consecutive selected frames is windowed independently.
pub fn window_phases(
    manifest: &SessionManifest,
    timestamps: &[i64],
    phases: &[Phase],
    window_s: u32,
    stride_s: u32,
) -> Vec<ObservationWindow> {
    let rate = manifest.sample_rate_hz;
    let (w, s) = (seconds_to_frames(window_s, rate), seconds_to_frames(stride_s, rate));
    let selected: Vec<bool> = timestamps
        .iter()
        .map(|&t| phases.contains(&manifest.phase_marks.phase_at(t)))
        .collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < selected.len() {
        if !selected[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < selected.len() && selected[i] {
            i += 1;
        }
        out.extend(window_range(manifest, start..i, w, s));
    }
    out
}
