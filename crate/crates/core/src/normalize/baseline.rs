use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::NormalizeError;
use crate::features::{SessionFeatures, CH_MEAN};

/// Mean idle (home) temperature of every grid cell for one headset model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadsetBaseline {
    pub device_model: String,
    pub n: usize,
    /// Row-major `n x n`; NaN where no idle sample exists.
    #[serde(with = "crate::util::nan_vec")]
    pub cells: Vec<f64>,
    pub counts: Vec<usize>,
}

impl HeadsetBaseline {
    /// Average the mean channel of every valid frame of the given idle sessions.
    /// `ambient` subtracts each frame's joined ambient first, matching an
    /// ambient-corrected feature pipeline.
    pub fn from_sessions<'a>(
        device_model: &str,
        n: usize,
        sessions: impl IntoIterator<Item = &'a SessionFeatures>,
        ambient: bool,
    ) -> Self {
        let mut sum = vec![0.0; n * n];
        let mut counts = vec![0usize; n * n];
        for s in sessions {
            debug_assert!(s.manifest.is_idle(), "baseline sessions must be idle");
            for (f, env) in s.frames.iter().zip(&s.env) {
                let Some(f) = f else { continue };
                let offset = match (ambient, env) {
                    (true, Some(e)) => e.ambient_c,
                    (true, None) => continue,
                    (false, _) => 0.0,
                };
                for (k, &v) in f.channels[CH_MEAN].iter().enumerate() {
                    if !v.is_nan() {
                        sum[k] += v - offset;
                        counts[k] += 1;
                    }
                }
            }
        }
        let cells = sum
            .iter()
            .zip(&counts)
            .map(|(&s, &c)| if c > 0 { s / c as f64 } else { f64::NAN })
            .collect();
        Self {
            device_model: device_model.to_string(),
            n,
            cells,
            counts,
        }
    }
}

/// Result of subtracting a baseline from a cell-mean grid or series.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineResidual {
    pub values: Vec<f64>,
    /// Cells passed through unmodified because the baseline had no sample there.
    pub unbaselined: Vec<usize>,
}

/// `T'(i,j) = T(i,j) - B(i,j)` per cell; cells with a missing baseline pass through.
pub fn apply_headset_baseline(cell_means: &[f64], baseline: &HeadsetBaseline) -> BaselineResidual {
    assert_eq!(cell_means.len(), baseline.cells.len(), "grid size mismatch");
    let mut unbaselined = Vec::new();
    let values = cell_means
        .iter()
        .zip(&baseline.cells)
        .enumerate()
        .map(|(k, (&t, &b))| {
            if b.is_nan() {
                unbaselined.push(k);
                t
            } else {
                t - b
            }
        })
        .collect();
    BaselineResidual {
        values,
        unbaselined,
    }
}

/// Idle baselines keyed by device model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BaselineStore {
    pub baselines: BTreeMap<String, HeadsetBaseline>,
}

impl BaselineStore {
    /// One baseline per device over the idle sessions in `sessions`.
    pub fn build<'a>(sessions: &[&'a SessionFeatures], ambient: bool) -> Self {
        let mut by_device: BTreeMap<&str, Vec<&'a SessionFeatures>> = BTreeMap::new();
        for s in sessions.iter().filter(|s| s.manifest.is_idle()) {
            by_device.entry(s.manifest.device_model.as_str()).or_default().push(s);
        }
        let baselines = by_device
            .into_iter()
            .map(|(dev, list)| {
                let n = list[0].n;
                (dev.to_string(), HeadsetBaseline::from_sessions(dev, n, list, ambient))
            })
            .collect();
        Self { baselines }
    }

    pub fn get(&self, device_model: &str) -> Result<&HeadsetBaseline, NormalizeError> {
        self.baselines
            .get(device_model)
            .ok_or_else(|| NormalizeError::BaselineMissing(device_model.to_string()))
    }

    pub fn insert(&mut self, baseline: HeadsetBaseline) {
        self.baselines.insert(baseline.device_model.clone(), baseline);
    }

    pub fn save(&self, path: &Path) -> Result<(), NormalizeError> {
        let text = serde_json::to_string_pretty(self).expect("baseline store serializes");
        fs::write(path, text).map_err(|e| NormalizeError::Io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Self, NormalizeError> {
        let text = fs::read_to_string(path).map_err(|e| NormalizeError::Io(path.display().to_string(), e))?;
        serde_json::from_str(&text).map_err(|e| NormalizeError::Format(e.to_string()))
    }
}
