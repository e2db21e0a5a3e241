use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::frame_store::RadiometricFrame;
use crate::roi::Mask;

/// Grid sides evaluated by the resolution sweep.
pub const GRID_SWEEP: [usize; 6] = [4, 8, 12, 16, 20, 24];

/// N x N partition of the headset bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    /// Minimum masked fraction of a cell for its statistics to be kept.
    pub min_cell_coverage: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n: 16,
            min_cell_coverage: 0.5,
        }
    }
}

impl GridSpec {
    pub fn new(n: usize) -> Result<Self, FeatureError> {
        Self {
            n,
            ..Self::default()
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self, FeatureError> {
        if self.n < 2 {
            return Err(FeatureError::Grid(format!("grid side {} < 2", self.n)));
        }
        if !(self.min_cell_coverage > 0.0 && self.min_cell_coverage <= 1.0) {
            return Err(FeatureError::Grid(format!(
                "coverage {} outside (0, 1]",
                self.min_cell_coverage
            )));
        }
        Ok(self)
    }

    pub fn cells(&self) -> usize {
        self.n * self.n
    }
}

/// Per-cell temperature summary. Absent cells hold NaN in every numeric field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
    pub present: bool,
}

impl CellStats {
    pub const MISSING: CellStats = CellStats {
        min: f64::NAN,
        max: f64::NAN,
        mean: f64::NAN,
        std: f64::NAN,
        present: false,
    };
}

/// Cell index of each offset along a side of `len` pixels split into `n`
/// cells; the remainder goes to the last cell.
fn cell_lookup(len: usize, n: usize) -> Vec<usize> {
    let base = len / n;
    (0..len)
        .map(|k| if base == 0 { n - 1 } else { (k / base).min(n - 1) })
        .collect()
}

/// Pixel count of each cell along one side.
fn cell_sizes(len: usize, n: usize) -> Vec<usize> {
    let mut sizes = vec![0; n];
    for c in cell_lookup(len, n) {
        sizes[c] += 1;
    }
    sizes
}

/// Min, max, mean and population standard deviation over the masked pixels of
/// each grid cell tiling the mask's bounding box. Cells whose masked share of
/// the cell area is below `grid.min_cell_coverage` are absent.
pub fn cell_stats(frame: &RadiometricFrame, mask: &Mask, grid: &GridSpec) -> Vec<CellStats> {
    let n = grid.n;
    let Some((r0, c0, r1, c1)) = mask.bbox() else {
        return vec![CellStats::MISSING; n * n];
    };
    let (bh, bw) = (r1 - r0 + 1, c1 - c0 + 1);
    let row_cell = cell_lookup(bh, n);
    let col_cell = cell_lookup(bw, n);
    let (row_sizes, col_sizes) = (cell_sizes(bh, n), cell_sizes(bw, n));

    let mut count = vec![0usize; n * n];
    let mut sum = vec![0.0f64; n * n];
    let mut lo = vec![f64::INFINITY; n * n];
    let mut hi = vec![f64::NEG_INFINITY; n * n];
    for r in r0..=r1 {
        let ci = row_cell[r - r0] * n;
        for c in c0..=c1 {
            if !mask.get(r, c) {
                continue;
            }
            let k = ci + col_cell[c - c0];
            let t = frame.get(r, c);
            count[k] += 1;
            sum[k] += t;
            lo[k] = lo[k].min(t);
            hi[k] = hi[k].max(t);
        }
    }
    let mean: Vec<f64> = (0..n * n)
        .map(|k| if count[k] > 0 { sum[k] / count[k] as f64 } else { f64::NAN })
        .collect();
    let mut sq = vec![0.0f64; n * n];
    for r in r0..=r1 {
        let ci = row_cell[r - r0] * n;
        for c in c0..=c1 {
            if mask.get(r, c) {
                let k = ci + col_cell[c - c0];
                let d = frame.get(r, c) - mean[k];
                sq[k] += d * d;
            }
        }
    }
    (0..n * n)
        .map(|k| {
            let area = row_sizes[k / n] * col_sizes[k % n];
            let present = area > 0
                && count[k] > 0
                && count[k] as f64 / area as f64 >= grid.min_cell_coverage;
            if !present {
                return CellStats::MISSING;
            }
            CellStats {
                min: lo[k],
                max: hi[k],
                mean: mean[k],
                std: (sq[k] / count[k] as f64).sqrt(),
                present: true,
            }
        })
        .collect()
}

/// Cell mean minus the mean of its valid up/down/left/right neighbours. NaN
/// where the cell is missing or has no valid neighbour.
pub fn spatial_gradient(mean_grid: &[f64], n: usize) -> Vec<f64> {
    assert_eq!(mean_grid.len(), n * n, "mean grid must be n x n");
    let mut out = vec![f64::NAN; n * n];
    for i in 0..n {
        for j in 0..n {
            let m = mean_grid[i * n + j];
            if m.is_nan() {
                continue;
            }
            let mut acc = 0.0;
            let mut cnt = 0usize;
            let neighbours = [
                (i.wrapping_sub(1), j),
                (i + 1, j),
                (i, j.wrapping_sub(1)),
                (i, j + 1),
            ];
            for (a, b) in neighbours {
                if a < n && b < n {
                    let v = mean_grid[a * n + b];
                    if !v.is_nan() {
                        acc += v;
                        cnt += 1;
                    }
                }
            }
            if cnt > 0 {
                out[i * n + j] = m - acc / cnt as f64;
            }
        }
    }
    out
}

/// `series[t] - series[t - lag]`; NaN for `t < lag` or when either end is missing.
pub fn temporal_delta(series: &[f64], lag: usize) -> Vec<f64> {
    (0..series.len())
        .map(|t| {
            if lag == 0 || t < lag {
                f64::NAN
            } else {
                series[t] - series[t - lag]
            }
        })
        .collect()
}
