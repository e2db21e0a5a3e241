use serde::{Deserialize, Serialize};

use super::{ForestModel, PreprocessState};

/// Forest importances expressed over the original (pre-selection) feature
/// space; unselected features get 0. Sums to 1 unless no tree ever split.
pub fn feature_importance(
    forest: &ForestModel,
    preprocess: &PreprocessState,
    feature_names: &[String],
) -> Vec<(String, f64)> {
    assert_eq!(forest.n_features, preprocess.selected.len(), "forest/preprocess mismatch");
    let mut full = vec![0.0; preprocess.n_input];
    for (pos, &j) in preprocess.selected.iter().enumerate() {
        full[j] = forest.importances[pos];
    }
    feature_names.iter().cloned().zip(full).collect()
}

/// Grid cell referenced by a feature name (`cell_<i>_<j>_...` or `delta<l>_<i>_<j>`).
pub fn feature_cell(name: &str) -> Option<(usize, usize)> {
    let rest = if let Some(r) = name.strip_prefix("cell_") {
        r
    } else {
        let r = name.strip_prefix("delta")?;
        r.split_once('_')?.1
    };
    let mut it = rest.split('_');
    let i = it.next()?.parse().ok()?;
    let j = it.next()?.parse().ok()?;
    Some((i, j))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridImportance {
    pub n: usize,
    /// Row-major summed importance per cell.
    pub cells: Vec<f64>,
    pub top20: Vec<bool>,
    pub bottom20: Vec<bool>,
}

/// Sum every per-cell feature's importance into its cell and flag the top and
/// bottom 20% of cells.
pub fn map_to_grid(importances: &[(String, f64)], n: usize) -> GridImportance {
    let mut cells = vec![0.0; n * n];
    for (name, v) in importances {
        if let Some((i, j)) = feature_cell(name) {
            if i < n && j < n {
                cells[i * n + j] += v;
            }
        }
    }
    let mut order: Vec<usize> = (0..n * n).collect();
    order.sort_by(|&a, &b| cells[b].total_cmp(&cells[a]).then(a.cmp(&b)));
    let k = ((n * n) as f64 * 0.2).round() as usize;
    let mut top20 = vec![false; n * n];
    let mut bottom20 = vec![false; n * n];
    for &c in &order[..k] {
        top20[c] = true;
    }
    for &c in &order[n * n - k..] {
        bottom20[c] = true;
    }
    GridImportance {
        n,
        cells,
        top20,
        bottom20,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_names() {
        assert_eq!(feature_cell("cell_3_12_mean_slope"), Some((3, 12)));
        assert_eq!(feature_cell("delta30_0_7"), Some((0, 7)));
        assert_eq!(feature_cell("ambient_c_mean"), None);
        assert_eq!(feature_cell("resid5_zoom_web"), None);
    }

    #[test]
    fn grid_flags() {
        let imp: Vec<(String, f64)> = (0..4)
            .flat_map(|c| {
                let (i, j) = (c / 2, c % 2);
                vec![
                    (format!("cell_{i}_{j}_min_mean"), c as f64 * 0.05),
                    (format!("delta5_{i}_{j}"), c as f64 * 0.05),
                ]
            })
            .chain([("ambient_c_mean".to_string(), 0.4)])
            .collect();
        let g = map_to_grid(&imp, 2);
        assert_eq!(g.cells, vec![0.0, 0.1, 0.2, 0.30000000000000004]);
        // 20% of 4 cells rounds to one cell at each end
        assert_eq!(g.top20, vec![false, false, false, true]);
        assert_eq!(g.bottom20, vec![true, false, false, false]);
    }
}
