use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::NormalizeError;

/// Lags (seconds) for which delta profiles are kept.
pub const PROFILE_LAGS: [usize; 2] = [5, 30];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagProfile {
    pub lag: usize,
    /// Expected window-mean delta per cell, row-major; NaN where never observed.
    #[serde(with = "crate::util::nan_vec")]
    pub cells: Vec<f64>,
}

/// Typical per-cell temperature change of each app at each lag, estimated on
/// indoor training windows.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DeltaBaselineTable {
    pub n: usize,
    pub profiles: BTreeMap<String, Vec<LagProfile>>,
}

/// Accumulates window-mean deltas into a [`DeltaBaselineTable`].
#[derive(Debug, Default)]
pub struct DeltaTableBuilder {
    n: usize,
    acc: BTreeMap<(String, usize), (Vec<f64>, Vec<usize>)>,
}

impl DeltaTableBuilder {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            acc: BTreeMap::new(),
        }
    }

    /// Add one window's per-cell mean delta at `lag` for `app`. Lags outside
    /// {5, 30} are ignored.
    pub fn add(&mut self, app: &str, lag: usize, cells: &[f64]) {
        if !PROFILE_LAGS.contains(&lag) {
            return;
        }
        let n2 = self.n * self.n;
        assert_eq!(cells.len(), n2, "delta grid size mismatch");
        let (sum, cnt) = self
            .acc
            .entry((app.to_string(), lag))
            .or_insert_with(|| (vec![0.0; n2], vec![0; n2]));
        for (k, &v) in cells.iter().enumerate() {
            if !v.is_nan() {
                sum[k] += v;
                cnt[k] += 1;
            }
        }
    }

    pub fn build(self) -> DeltaBaselineTable {
        let mut profiles: BTreeMap<String, Vec<LagProfile>> = BTreeMap::new();
        for ((app, lag), (sum, cnt)) in self.acc {
            let cells = sum
                .iter()
                .zip(&cnt)
                .map(|(&s, &c)| if c > 0 { s / c as f64 } else { f64::NAN })
                .collect();
            profiles.entry(app).or_default().push(LagProfile { lag, cells });
        }
        DeltaBaselineTable { n: self.n, profiles }
    }
}

impl DeltaBaselineTable {
    pub fn apps(&self) -> impl Iterator<Item = &str> {
        self.profiles.keys().map(String::as_str)
    }

    pub fn expected(&self, app: &str, cell: usize, lag: usize) -> Option<f64> {
        let v = self
            .profiles
            .get(app)?
            .iter()
            .find(|p| p.lag == lag)?
            .cells
            .get(cell)
            .copied()?;
        (!v.is_nan()).then_some(v)
    }

    pub fn save(&self, path: &Path) -> Result<(), NormalizeError> {
        let text = serde_json::to_string_pretty(self).expect("delta table serializes");
        fs::write(path, text).map_err(|e| NormalizeError::Io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Self, NormalizeError> {
        let text = fs::read_to_string(path).map_err(|e| NormalizeError::Io(path.display().to_string(), e))?;
        serde_json::from_str(&text).map_err(|e| NormalizeError::Format(e.to_string()))
    }
}

/// Observed delta minus the app's indoor profile; `None` when the key is unknown.
pub fn delta_residual(
    observed: f64,
    table: &DeltaBaselineTable,
    app_label: &str,
    cell: usize,
    lag: usize,
) -> Option<f64> {
    if observed.is_nan() {
        return None;
    }
    table.expected(app_label, cell, lag).map(|e| observed - e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> DeltaBaselineTable {
        let mut b = DeltaTableBuilder::new(2);
        b.add("vrfs", 5, &[0.4, 0.1, f64::NAN, 0.0]);
        b.add("vrfs", 5, &[0.6, 0.3, f64::NAN, 0.0]);
        b.add("vrfs", 30, &[3.0, 1.0, 1.0, 1.0]);
        b.add("vrfs", 7, &[9.0; 4]);
        b.build()
    }

    #[test]
    fn builder_averages_windows() {
        let t = table();
        assert!((t.expected("vrfs", 0, 5).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(t.expected("vrfs", 2, 5), None);
        assert_eq!(t.expected("vrfs", 0, 7), None);
    }

    #[test]
    fn residual_examples() {
        let t = table();
        assert!((delta_residual(0.8, &t, "vrfs", 0, 5).unwrap() - 0.3).abs() < 1e-12);
        assert_eq!(delta_residual(3.0, &t, "vrfs", 0, 30), Some(0.0));
        assert_eq!(delta_residual(0.8, &t, "zoom_web", 0, 5), None);
    }
}
