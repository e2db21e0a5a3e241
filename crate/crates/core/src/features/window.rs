use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{SessionFeatures, CHANNELS, CH_MAX, CH_MEAN, CH_MIN};
use crate::frame_store::ObservationWindow;
use crate::normalize::{
    ambient_correct, delta_residual, wind_correct, DeltaBaselineTable, HeadsetBaseline,
    WindObservation,
};
use crate::util::stable_hash;

/// Window aggregations applied to every per-frame channel.
pub const AGGREGATIONS: [&str; 2] = ["mean", "slope"];
/// Context features appended to every vector.
pub const CONTEXT_FEATURES: [&str; 3] = ["ambient_c_mean", "air_velocity_mean", "distance_cm_mean"];
/// Default temporal-delta lags, seconds.
pub const DEFAULT_LAGS: [usize; 2] = [5, 30];

/// Ordered feature names for a grid side, lag set and residual app set.
///
/// Order: for every cell `(i, j)` row-major, every channel, every
/// aggregation `cell_<i>_<j>_<stat>_<agg>`; then for every lag and cell
/// `delta<l>_<i>_<j>`; then `resid<l>_<app>` per lag and app when a delta
/// table is in use; then the context features.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub n: usize,
    pub lags: Vec<usize>,
    pub residual_apps: Vec<String>,
}

impl FeatureSchema {
    pub fn new(n: usize, lags: &[usize]) -> Self {
        Self {
            n,
            lags: lags.to_vec(),
            residual_apps: Vec::new(),
        }
    }

    pub fn base_len(&self) -> usize {
        let n2 = self.n * self.n;
        CHANNELS.len() * AGGREGATIONS.len() * n2 + self.lags.len() * n2
    }

    pub fn len(&self) -> usize {
        self.base_len() + self.lags.len() * self.residual_apps.len() + CONTEXT_FEATURES.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of `cell_<i>_<j>_<channel>_<agg>`.
    pub fn cell_index(&self, cell: usize, channel: usize, agg: usize) -> usize {
        (cell * CHANNELS.len() + channel) * AGGREGATIONS.len() + agg
    }

    /// Index of `delta<lag>_<i>_<j>` where `lag_pos` indexes `self.lags`.
    pub fn delta_index(&self, lag_pos: usize, cell: usize) -> usize {
        let n2 = self.n * self.n;
        CHANNELS.len() * AGGREGATIONS.len() * n2 + lag_pos * n2 + cell
    }

    pub fn names(&self) -> Vec<String> {
        let n = self.n;
        let mut names = Vec::with_capacity(self.len());
        for i in 0..n {
            for j in 0..n {
                for stat in CHANNELS {
                    for agg in AGGREGATIONS {
                        names.push(format!("cell_{i}_{j}_{stat}_{agg}"));
                    }
                }
            }
        }
        for lag in &self.lags {
            for i in 0..n {
                for j in 0..n {
                    names.push(format!("delta{lag}_{i}_{j}"));
                }
            }
        }
        for lag in &self.lags {
            for app in &self.residual_apps {
                names.push(format!("resid{lag}_{app}"));
            }
        }
        names.extend(CONTEXT_FEATURES.iter().map(|s| s.to_string()));
        names
    }
}

/// Corrections applied while aggregating a window.
#[derive(Debug, Clone, Copy, Default)]
pub struct WindowOptions<'a> {
    /// Subtract the joined ambient temperature from min/max/mean channels.
    pub ambient: bool,
    /// Wind coefficient for delta and slope channels.
    pub wind_k: Option<f64>,
    /// Idle baseline subtracted from min/max/mean channels.
    pub baseline: Option<&'a HeadsetBaseline>,
}

/// One window's feature values plus identifying metadata. NaN marks missing entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub session_id: String,
    pub window_start: usize,
    pub label: String,
    #[serde(with = "crate::util::nan_vec")]
    pub values: Vec<f64>,
}

/// A window with fewer than half of its frames valid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowDropped {
    pub session_id: String,
    pub window_start: usize,
    pub valid_frames: usize,
    pub window_frames: usize,
}

fn ambient_at(session: &SessionFeatures, t: usize) -> Option<f64> {
    session.env[t].map(|e| e.ambient_c)
}

/// Ambient-corrected (if requested) cell mean at frame `t`.
fn level(session: &SessionFeatures, t: usize, k: usize, ambient: Option<f64>) -> f64 {
    let v = session.frames[t].as_ref().map_or(f64::NAN, |f| f.channels[CH_MEAN][k]);
    match ambient {
        Some(a) => ambient_correct(v, a),
        None => v,
    }
}

/// Frame-level delta at `t` for cell `k`; both ends use the same correction.
fn frame_delta(session: &SessionFeatures, t: usize, lag: usize, k: usize, ambient: bool) -> f64 {
    if t < lag {
        return f64::NAN;
    }
    let (a_now, a_then) = if ambient {
        match (ambient_at(session, t), ambient_at(session, t - lag)) {
            (Some(a), Some(b)) => (Some(a), Some(b)),
            _ => (None, None),
        }
    } else {
        (None, None)
    };
    level(session, t, k, a_now) - level(session, t - lag, k, a_then)
}

fn mean_of(values: impl Iterator<Item = f64>) -> f64 {
    crate::util::nan_mean(values)
}

/// Aggregate a window into its feature vector: per-channel temporal mean and
/// least-squares drift slope (°C/s), window-mean delta per lag and cell, and
/// the context means.
pub fn assemble_window_features(
    window: &ObservationWindow,
    session: &SessionFeatures,
    schema: &FeatureSchema,
    opts: &WindowOptions<'_>,
) -> Result<FeatureVector, WindowDropped> {
    let n2 = session.n * session.n;
    assert_eq!(schema.n, session.n, "schema grid must match session grid");
    let range = window.frame_range();
    let present: Vec<usize> = range.clone().filter(|&t| session.frames[t].is_some()).collect();
    if present.len() * 2 < window.len {
        return Err(WindowDropped {
            session_id: window.session_id.clone(),
            window_start: window.start_index,
            valid_frames: present.len(),
            window_frames: window.len,
        });
    }
    let rate = session.manifest.sample_rate_hz;
    let velocity = mean_of(range.clone().filter_map(|t| session.env[t].map(|e| e.air_velocity_mps)));
    let wind_factor = |d: f64, v: f64| match opts.wind_k {
        Some(k) if !v.is_nan() => wind_correct(d, v, k),
        _ => d,
    };

    let slots = CHANNELS.len() * n2;
    let mut cnt = vec![0u32; slots];
    let mut sx = vec![0.0f64; slots];
    let mut sxx = vec![0.0f64; slots];
    let mut sy = vec![0.0f64; slots];
    let mut sxy = vec![0.0f64; slots];
    for &t in &present {
        let f = session.frames[t].as_ref().expect("present frame");
        let x = (t - window.start_index) as f64 / rate;
        let amb = if opts.ambient { ambient_at(session, t) } else { None };
        for (ch, values) in f.channels.iter().enumerate() {
            let level_channel = matches!(ch, CH_MIN | CH_MAX | CH_MEAN);
            for (k, &raw) in values.iter().enumerate() {
                if raw.is_nan() {
                    continue;
                }
                let mut v = raw;
                if level_channel {
                    if let Some(a) = amb {
                        v = ambient_correct(v, a);
                    }
                    if let Some(b) = opts.baseline {
                        if !b.cells[k].is_nan() {
                            v -= b.cells[k];
                        }
                    }
                }
                let s = ch * n2 + k;
                cnt[s] += 1;
                sx[s] += x;
                sxx[s] += x * x;
                sy[s] += v;
                sxy[s] += x * v;
            }
        }
    }

    let mut values = vec![f64::NAN; schema.len()];
    for ch in 0..CHANNELS.len() {
        for k in 0..n2 {
            let s = ch * n2 + k;
            let c = cnt[s] as f64;
            if cnt[s] == 0 {
                continue;
            }
            values[schema.cell_index(k, ch, 0)] = sy[s] / c;
            let denom = c * sxx[s] - sx[s] * sx[s];
            if cnt[s] >= 2 && denom > 0.0 {
                let slope = (c * sxy[s] - sx[s] * sy[s]) / denom;
                values[schema.cell_index(k, ch, 1)] = wind_factor(slope, velocity);
            }
        }
    }
    for (lp, &lag) in schema.lags.iter().enumerate() {
        for k in 0..n2 {
            let deltas = range.clone().map(|t| {
                let d = frame_delta(session, t, lag, k, opts.ambient);
                let v = session.env[t].map_or(f64::NAN, |e| e.air_velocity_mps);
                wind_factor(d, v)
            });
            values[schema.delta_index(lp, k)] = mean_of(deltas);
        }
    }
    let ctx = schema.len() - CONTEXT_FEATURES.len();
    values[ctx] = mean_of(range.clone().filter_map(|t| session.env[t].map(|e| e.ambient_c)));
    values[ctx + 1] = velocity;
    values[ctx + 2] = mean_of(range.clone().filter_map(|t| session.env[t].map(|e| e.distance_cm)));
    Ok(FeatureVector {
        session_id: window.session_id.clone(),
        window_start: window.start_index,
        label: window.label.clone(),
        values,
    })
}

/// Fill the `resid<l>_<app>` slots of a vector: for each lag and app
/// hypothesis, the mean absolute residual of the window's cell deltas against
/// that app's indoor profile.
pub fn fill_residuals(vector: &mut FeatureVector, schema: &FeatureSchema, table: &DeltaBaselineTable) {
    let n2 = schema.n * schema.n;
    let base = schema.base_len();
    let napps = schema.residual_apps.len();
    for (lp, &lag) in schema.lags.iter().enumerate() {
        for (ap, app) in schema.residual_apps.iter().enumerate() {
            let r = mean_of((0..n2).filter_map(|k| {
                delta_residual(vector.values[schema.delta_index(lp, k)], table, app, k, lag).map(f64::abs)
            }));
            vector.values[base + lp * napps + ap] = r;
        }
    }
}

/// Wind-fit observations for one window: per lag and cell, the RMS of the
/// frame-level deltas paired with the window's mean air velocity. Groups are
/// keyed by (label, cell, lag).
pub fn wind_observations(
    window: &ObservationWindow,
    session: &SessionFeatures,
    lags: &[usize],
    ambient: bool,
) -> Vec<WindObservation> {
    let range = window.frame_range();
    let velocity = mean_of(range.clone().filter_map(|t| session.env[t].map(|e| e.air_velocity_mps)));
    if velocity.is_nan() {
        return Vec::new();
    }
    let label_hash = stable_hash(&window.label);
    let n2 = session.n * session.n;
    let mut out = Vec::new();
    for &lag in lags {
        for k in 0..n2 {
            let (mut ss, mut c) = (0.0, 0usize);
            for t in range.clone() {
                let d = frame_delta(session, t, lag, k, ambient);
                if !d.is_nan() {
                    ss += d * d;
                    c += 1;
                }
            }
            if c > 0 {
                out.push(WindObservation {
                    group: crate::util::mix_seed(label_hash, (lag * n2 + k) as u64),
                    magnitude: (ss / c as f64).sqrt(),
                    velocity,
                });
            }
        }
    }
    out
}

/// Write vectors as CSV: feature names followed by `session_id,window_start,label`.
pub fn write_feature_csv<W: Write>(
    out: W,
    names: &[String],
    vectors: &[FeatureVector],
) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = names.iter().map(String::as_str).collect();
    header.extend(["session_id", "window_start", "label"]);
    w.write_record(&header)?;
    for v in vectors {
        let mut rec: Vec<String> = v.values.iter().map(|x| format!("{x}")).collect();
        rec.push(v.session_id.clone());
        rec.push(v.window_start.to_string());
        rec.push(v.label.clone());
        w.write_record(&rec)?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_length_matches_names() {
        let s = FeatureSchema::new(16, &DEFAULT_LAGS);
        let names = s.names();
        assert_eq!(names.len(), s.len());
        assert_eq!(s.len(), 3075);
        assert_eq!(names[s.cell_index(0, 2, 0)], "cell_0_0_mean_mean");
        assert_eq!(names[s.cell_index(3 * 16 + 3, 4, 1)], "cell_3_3_grad_slope");
        assert_eq!(names[s.delta_index(1, 17)], "delta30_1_1");
        assert_eq!(names.last().unwrap(), "distance_cm_mean");
    }

    #[test]
    fn residual_slots_follow_deltas() {
        let mut s = FeatureSchema::new(2, &[5, 30]);
        s.residual_apps = vec!["a".into(), "b".into()];
        let names = s.names();
        assert_eq!(names[s.base_len()], "resid5_a");
        assert_eq!(names[s.base_len() + 3], "resid30_b");
        assert_eq!(names.len(), s.len());
    }
}
