use serde::{Deserialize, Serialize};

use super::{anova_f, ClassifyError, Matrix};
use crate::util::nan_median;

/// Raw-scale variance floor (°C²): the square of a 40 mK noise-equivalent
/// temperature difference.
pub const NETD_VARIANCE: f64 = 0.0016;
/// Upper bound on the number of ANOVA-selected features.
pub const DEFAULT_MAX_SELECTED: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub variance_threshold: f64,
    pub max_selected: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            variance_threshold: NETD_VARIANCE,
            max_selected: DEFAULT_MAX_SELECTED,
        }
    }
}

/// Training-split preprocessing, frozen after fitting: median imputation,
/// raw-variance filter, standardisation and ANOVA top-K selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessState {
    pub n_input: usize,
    pub medians: Vec<f64>,
    /// Raw training variance per input feature.
    pub variances: Vec<f64>,
    pub variance_threshold: f64,
    /// Input indices surviving the variance filter, ascending.
    pub kept: Vec<usize>,
    /// Training mean and standard deviation per input feature (0/1 when filtered).
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    /// ANOVA F per input feature (0 for filtered features).
    pub f_scores: Vec<f64>,
    /// Input indices of the selected features, ascending.
    pub selected: Vec<usize>,
}

impl PreprocessState {
    pub fn k(&self) -> usize {
        self.selected.len()
    }

    fn impute(&self, j: usize, v: f64) -> f64 {
        if v.is_nan() {
            self.medians[j]
        } else {
            v
        }
    }

    /// Imputed, standardised values of every input feature (no selection).
    pub fn standardize_all(&self, x: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(x.rows(), x.cols());
        for r in 0..x.rows() {
            for j in 0..x.cols() {
                out.set(r, j, (self.impute(j, x.get(r, j)) - self.means[j]) / self.stds[j]);
            }
        }
        out
    }

    /// Apply the frozen transform: rows x selected features.
    pub fn transform(&self, x: &Matrix) -> Matrix {
        assert_eq!(x.cols(), self.n_input, "feature count mismatch");
        let mut out = Matrix::zeros(x.rows(), self.selected.len());
        for r in 0..x.rows() {
            let row = x.row(r);
            let dst = out.row_mut(r);
            for (o, &j) in dst.iter_mut().zip(&self.selected) {
                *o = (self.impute(j, row[j]) - self.means[j]) / self.stds[j];
            }
        }
        out
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        self.selected
            .iter()
            .map(|&j| (self.impute(j, row[j]) - self.means[j]) / self.stds[j])
            .collect()
    }
}

/// Fit preprocessing on a training matrix with class-index labels.
pub fn fit_preprocess(
    x: &Matrix,
    labels: &[usize],
    config: &PreprocessConfig,
) -> Result<PreprocessState, ClassifyError> {
    if x.rows() == 0 || x.cols() == 0 {
        return Err(ClassifyError::Preprocess("empty training matrix".into()));
    }
    assert_eq!(x.rows(), labels.len(), "one label per row");
    let d = x.cols();
    let nrows = x.rows() as f64;
    let mut medians = Vec::with_capacity(d);
    let mut means = vec![0.0; d];
    let mut stds = vec![1.0; d];
    let mut variances = vec![0.0; d];
    let mut kept = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(d);
    for j in 0..d {
        let mut col = x.column(j);
        let med = nan_median(&col).unwrap_or(0.0);
        for v in col.iter_mut() {
            if v.is_nan() {
                *v = med;
            }
        }
        medians.push(med);
        let mean = col.iter().sum::<f64>() / nrows;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / nrows;
        variances[j] = var;
        means[j] = mean;
        if var >= config.variance_threshold && var > 0.0 {
            stds[j] = var.sqrt();
            kept.push(j);
        }
        columns.push(col);
    }
    if kept.is_empty() {
        return Err(ClassifyError::Preprocess(format!(
            "all {d} features fall below the variance threshold {}",
            config.variance_threshold
        )));
    }
    let mut f_scores = vec![0.0; d];
    for &j in &kept {
        let z: Vec<f64> = columns[j].iter().map(|v| (v - means[j]) / stds[j]).collect();
        f_scores[j] = match anova_f(&z, labels) {
            // f64::MAX stands in for +inf so the state survives JSON.
            Ok(f) => f.min(f64::MAX),
            Err(ClassifyError::Groups(_)) => 0.0,
            Err(e) => return Err(e),
        };
    }
    let k = config.max_selected.min(kept.len());
    let mut ranked = kept.clone();
    // Stable sort: equal F keeps ascending index order.
    ranked.sort_by(|&a, &b| f_scores[b].total_cmp(&f_scores[a]));
    let mut selected: Vec<usize> = ranked.into_iter().take(k).collect();
    selected.sort_unstable();
    Ok(PreprocessState {
        n_input: d,
        medians,
        variances,
        variance_threshold: config.variance_threshold,
        kept,
        means,
        stds,
        f_scores,
        selected,
    })
}
