use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ClassifyError, Matrix};
use crate::util::mix_seed;

/// Nodes smaller than this are split by sorting instead of histograms.
const SORT_SPLIT_BELOW: usize = 64;
const MAX_BINS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features tried per split; `None` means ceil(sqrt(d)).
    pub max_features: Option<usize>,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            trees: 300,
            max_depth: 24,
            min_leaf: 2,
            max_features: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    /// Samples with `x[feature] <= threshold` go left.
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf { dist: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub seed: u64,
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(&self, x: &[f64]) -> &[f64] {
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                Node::Leaf { dist } => return dist,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[*feature as usize] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => {
                    1 + walk(nodes, *left as usize).max(walk(nodes, *right as usize))
                }
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub params: ForestParams,
    pub n_classes: usize,
    pub n_features: usize,
    pub max_features: usize,
    pub seed: u64,
    pub trees: Vec<Tree>,
    /// Mean decrease in Gini impurity, normalised to sum 1 (all zero when no tree split).
    pub importances: Vec<f64>,
}

impl ForestModel {
    /// Mean of the per-tree leaf class distributions.
    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; self.n_classes];
        for t in &self.trees {
            for (a, b) in p.iter_mut().zip(t.leaf(x)) {
                *a += b;
            }
        }
        let n = self.trees.len().max(1) as f64;
        p.iter_mut().for_each(|v| *v /= n);
        p
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        super::argmax(&self.predict_proba(x))
    }
}

/// Per-feature candidate thresholds and the bin of every training sample.
/// Thresholds are training values, so a sample lands in bin `b` iff it is
/// `<= thresholds[b]` and `> thresholds[b - 1]`.
struct Binned {
    thresholds: Vec<Vec<f64>>,
    /// Column-major bins: `bins[f * rows + r]`.
    bins: Vec<u8>,
    rows: usize,
}

impl Binned {
    fn new(x: &Matrix) -> Self {
        let rows = x.rows();
        let mut thresholds = Vec::with_capacity(x.cols());
        let mut bins = vec![0u8; rows * x.cols()];
        for f in 0..x.cols() {
            let col = x.column(f);
            let mut sorted = col.clone();
            sorted.sort_unstable_by(f64::total_cmp);
            let mut distinct = sorted.clone();
            distinct.dedup();
            let th: Vec<f64> = if distinct.len() <= MAX_BINS {
                distinct
            } else {
                // Equal-count bins: upper edges at sample quantiles.
                let mut edges: Vec<f64> = (1..MAX_BINS)
                    .map(|b| sorted[b * rows / MAX_BINS - 1])
                    .collect();
                edges.push(sorted[rows - 1]);
                edges.dedup();
                edges
            };
            for (r, v) in col.iter().enumerate() {
                let b = th.partition_point(|t| t < v).min(th.len() - 1);
                bins[f * rows + r] = b as u8;
            }
            thresholds.push(th);
        }
        Self {
            thresholds,
            bins,
            rows,
        }
    }

    #[inline]
    fn bin(&self, f: usize, r: usize) -> usize {
        self.bins[f * self.rows + r] as usize
    }
}

fn gini(counts: &[f64], total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    1.0 - counts.iter().map(|c| (c / total) * (c / total)).sum::<f64>()
}

struct Best {
    score: f64,
    feature: usize,
    bin: usize,
}

struct TreeBuilder<'a> {
    data: &'a Binned,
    y: &'a [usize],
    weight: Vec<f64>,
    n_classes: usize,
    params: ForestParams,
    mtry: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
    importance: Vec<f64>,
    feature_pool: Vec<usize>,
    hist: Vec<f64>,
}

impl TreeBuilder<'_> {
    fn class_counts(&self, idx: &[usize]) -> Vec<f64> {
        let mut c = vec![0.0; self.n_classes];
        for &i in idx {
            c[self.y[i]] += self.weight[i];
        }
        c
    }

    fn leaf(&mut self, counts: &[f64], total: f64) -> u32 {
        let dist = counts.iter().map(|c| c / total).collect();
        self.nodes.push(Node::Leaf { dist });
        (self.nodes.len() - 1) as u32
    }

    fn sample_features(&mut self) -> Vec<usize> {
        let d = self.feature_pool.len();
        for i in 0..self.mtry {
            let j = self.rng.random_range(i..d);
            self.feature_pool.swap(i, j);
        }
        let mut f = self.feature_pool[..self.mtry].to_vec();
        f.sort_unstable();
        f
    }

    /// Scan split boundaries of one feature given per-bin class weights
    /// (bins visited in ascending order).
    fn scan(
        &self,
        f: usize,
        per_bin: impl Iterator<Item = (usize, Vec<f64>)>,
        total: &[f64],
        wsum: f64,
        best: &mut Option<Best>,
    ) {
        let mut left = vec![0.0; self.n_classes];
        let mut wl = 0.0;
        let min_leaf = self.params.min_leaf as f64;
        let last = self.data.thresholds[f].len() - 1;
        for (b, counts) in per_bin {
            for (l, c) in left.iter_mut().zip(&counts) {
                *l += c;
            }
            wl += counts.iter().sum::<f64>();
            let wr = wsum - wl;
            if b == last || wl < min_leaf || wr < min_leaf || wr <= 0.0 {
                continue;
            }
            let right: Vec<f64> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
            let score = (wl * gini(&left, wl) + wr * gini(&right, wr)) / wsum;
            let better = match best {
                None => true,
                Some(bst) => score < bst.score - 1e-12,
            };
            if better {
                *best = Some(Best {
                    score,
                    feature: f,
                    bin: b,
                });
            }
        }
    }

    fn best_split(&mut self, idx: &[usize], total: &[f64], wsum: f64) -> Option<Best> {
        let features = self.sample_features();
        let mut best: Option<Best> = None;
        let c = self.n_classes;
        for f in features {
            if idx.len() < SORT_SPLIT_BELOW {
                let mut pairs: Vec<(usize, usize)> =
                    idx.iter().map(|&i| (self.data.bin(f, i), i)).collect();
                pairs.sort_unstable();
                let mut groups: Vec<(usize, Vec<f64>)> = Vec::new();
                for (b, i) in pairs {
                    if groups.last().map(|g| g.0) != Some(b) {
                        groups.push((b, vec![0.0; c]));
                    }
                    groups.last_mut().unwrap().1[self.y[i]] += self.weight[i];
                }
                self.scan(f, groups.into_iter(), total, wsum, &mut best);
            } else {
                let (mut lo, mut hi) = (usize::MAX, 0usize);
                let mut hist = std::mem::take(&mut self.hist);
                for &i in idx {
                    let b = self.data.bin(f, i);
                    hist[b * c + self.y[i]] += self.weight[i];
                    lo = lo.min(b);
                    hi = hi.max(b);
                }
                let per_bin = (lo..=hi).filter_map(|b| {
                    let row = &hist[b * c..(b + 1) * c];
                    row.iter().any(|&v| v > 0.0).then(|| (b, row.to_vec()))
                });
                self.scan(f, per_bin, total, wsum, &mut best);
                hist[lo * c..(hi + 1) * c].iter_mut().for_each(|v| *v = 0.0);
                self.hist = hist;
            }
        }
        best
    }

    fn build(&mut self, idx: &mut [usize], depth: usize) -> u32 {
        let counts = self.class_counts(idx);
        let wsum: f64 = counts.iter().sum();
        let impurity = gini(&counts, wsum);
        let pure = counts.iter().filter(|&&c| c > 0.0).count() <= 1;
        if pure
            || depth >= self.params.max_depth
            || wsum < 2.0 * self.params.min_leaf as f64
        {
            return self.leaf(&counts, wsum);
        }
        let Some(best) = self.best_split(idx, &counts, wsum) else {
            return self.leaf(&counts, wsum);
        };
        if impurity - best.score <= 1e-12 {
            return self.leaf(&counts, wsum);
        }
        self.importance[best.feature] += wsum * (impurity - best.score);
        // In-place partition: left block holds bins <= best.bin.
        let mut split = 0;
        for k in 0..idx.len() {
            if self.data.bin(best.feature, idx[k]) <= best.bin {
                idx.swap(split, k);
                split += 1;
            }
        }
        let me = self.nodes.len();
        self.nodes.push(Node::Leaf { dist: Vec::new() });
        let (l, r) = idx.split_at_mut(split);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[me] = Node::Split {
            feature: best.feature as u32,
            threshold: self.data.thresholds[best.feature][best.bin],
            left,
            right,
        };
        me as u32
    }
}

fn train_tree(
    data: &Binned,
    y: &[usize],
    n_classes: usize,
    params: ForestParams,
    mtry: usize,
    seed: u64,
) -> (Tree, Vec<f64>) {
    let n = y.len();
    let d = data.thresholds.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weight = vec![0.0; n];
    for _ in 0..n {
        weight[rng.random_range(0..n)] += 1.0;
    }
    let mut idx: Vec<usize> = (0..n).filter(|&i| weight[i] > 0.0).collect();
    let mut b = TreeBuilder {
        data,
        y,
        weight,
        n_classes,
        params,
        mtry,
        rng,
        nodes: Vec::new(),
        importance: vec![0.0; d],
        feature_pool: (0..d).collect(),
        hist: vec![0.0; MAX_BINS * n_classes],
    };
    b.build(&mut idx, 0);
    let total: f64 = b.importance.iter().sum();
    if total > 0.0 {
        b.importance.iter_mut().for_each(|v| *v /= total);
    }
    (
        Tree {
            seed,
            nodes: b.nodes,
        },
        b.importance,
    )
}

/// Bagged Gini trees over class indices `0..n_classes`.
pub fn train_forest(
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    params: &ForestParams,
    seed: u64,
) -> Result<ForestModel, ClassifyError> {
    if x.rows() == 0 || x.cols() == 0 {
        return Err(ClassifyError::Train("empty training matrix".into()));
    }
    assert_eq!(x.rows(), y.len(), "one label per row");
    if let Some(&bad) = y.iter().find(|&&c| c >= n_classes) {
        return Err(ClassifyError::Train(format!("label {bad} >= class count {n_classes}")));
    }
    if params.trees == 0 || params.min_leaf == 0 {
        return Err(ClassifyError::Train("trees and min_leaf must be positive".into()));
    }
    let d = x.cols();
    let mtry = params
        .max_features
        .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
        .clamp(1, d);
    let data = Binned::new(x);
    let seeds: Vec<u64> = (0..params.trees as u64).map(|t| mix_seed(seed, t)).collect();
    let fit = |s: &u64| train_tree(&data, y, n_classes, *params, mtry, *s);
    #[cfg(feature = "parallel")]
    let fitted: Vec<(Tree, Vec<f64>)> = {
        use rayon::prelude::*;
        seeds.par_iter().map(fit).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let fitted: Vec<(Tree, Vec<f64>)> = seeds.iter().map(fit).collect();

    let mut importances = vec![0.0; d];
    let mut trees = Vec::with_capacity(fitted.len());
    for (t, imp) in fitted {
        for (a, b) in importances.iter_mut().zip(&imp) {
            *a += b;
        }
        trees.push(t);
    }
    let total: f64 = importances.iter().sum();
    if total > 0.0 {
        importances.iter_mut().for_each(|v| *v /= total);
    }
    Ok(ForestModel {
        params: *params,
        n_classes,
        n_features: d,
        max_features: mtry,
        seed,
        trees,
        importances,
    })
}
