use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ClassifyError, Matrix};
use crate::util::mix_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginParams {
    pub lambda: f64,
    pub epochs: usize,
}

impl Default for MarginParams {
    fn default() -> Self {
        Self {
            lambda: 1e-3,
            epochs: 30,
        }
    }
}

/// One-vs-rest linear classifiers fitted by stochastic subgradient descent on
/// the L2-regularised hinge loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginModel {
    pub params: MarginParams,
    pub n_classes: usize,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

impl MarginModel {
    pub fn decision(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + b)
            .collect()
    }

    /// Softmax of the decision values; a score, not a calibrated probability.
    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let s = self.decision(x);
        let m = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = s.iter().map(|v| (v - m).exp()).collect();
        let z: f64 = e.iter().sum();
        e.into_iter().map(|v| v / z).collect()
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        super::argmax(&self.decision(x))
    }
}

fn fit_binary(x: &Matrix, target: &[f64], params: &MarginParams, seed: u64) -> (Vec<f64>, f64) {
    let d = x.cols();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..x.rows()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = 0usize;
    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (params.lambda * t as f64);
            let row = x.row(i);
            let y = target[i];
            let margin = y * (w.iter().zip(row).map(|(a, v)| a * v).sum::<f64>() + b);
            let shrink = 1.0 - eta * params.lambda;
            w.iter_mut().for_each(|a| *a *= shrink);
            if margin < 1.0 {
                for (a, v) in w.iter_mut().zip(row) {
                    *a += eta * y * v;
                }
                // Unregularised bias with a damped step.
                b += eta * y * params.lambda.sqrt();
            }
        }
        // Projection onto the ball of radius 1/sqrt(lambda).
        let norm = w.iter().map(|a| a * a).sum::<f64>().sqrt();
        let cap = 1.0 / params.lambda.sqrt();
        if norm > cap {
            w.iter_mut().for_each(|a| *a *= cap / norm);
        }
    }
    (w, b)
}

pub fn train_margin(
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    params: &MarginParams,
    seed: u64,
) -> Result<MarginModel, ClassifyError> {
    if x.rows() == 0 || x.cols() == 0 {
        return Err(ClassifyError::Train("empty training matrix".into()));
    }
    assert_eq!(x.rows(), y.len(), "one label per row");
    if !(params.lambda > 0.0) || params.epochs == 0 {
        return Err(ClassifyError::Train("lambda and epochs must be positive".into()));
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= n_classes) {
        return Err(ClassifyError::Train(format!("label {bad} >= class count {n_classes}")));
    }
    let mut weights = Vec::with_capacity(n_classes);
    let mut biases = Vec::with_capacity(n_classes);
    let present: Vec<bool> = (0..n_classes).map(|c| y.contains(&c)).collect();
    let n_present = present.iter().filter(|&&p| p).count();
    for c in 0..n_classes {
        if n_present <= 1 {
            // Degenerate: constant model favouring the only observed class.
            weights.push(vec![0.0; x.cols()]);
            biases.push(if present[c] { 1.0 } else { -1.0 });
            continue;
        }
        let target: Vec<f64> = y.iter().map(|&l| if l == c { 1.0 } else { -1.0 }).collect();
        let (w, b) = fit_binary(x, &target, params, mix_seed(seed, c as u64));
        weights.push(w);
        biases.push(if present[c] { b } else { b - 1e6 });
    }
    Ok(MarginModel {
        params: *params,
        n_classes,
        weights,
        biases,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dim_sign() {
        let x = Matrix::from_rows(&[[-1.0], [-1.2], [-0.8], [1.0], [1.1], [0.9]]);
        let y = [0, 0, 0, 1, 1, 1];
        let m = train_margin(&x, &y, 2, &MarginParams::default(), 1).unwrap();
        for (r, &c) in y.iter().enumerate() {
            assert_eq!(m.predict(x.row(r)), c);
        }
        assert!(m.weights[1][0] > 0.0 && m.weights[0][0] < 0.0);
    }

    #[test]
    fn separable_blobs_generalise() {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..40 {
            let t = i as f64 * 0.05;
            rows.push(vec![-1.0 - t, 0.5 * t]);
            y.push(0);
            rows.push(vec![1.0 + t, -0.5 * t]);
            y.push(1);
        }
        let x = Matrix::from_rows(&rows);
        let m = train_margin(&x, &y, 2, &MarginParams::default(), 3).unwrap();
        let test = Matrix::from_rows(&[[-1.5, 0.3], [-1.1, -0.4], [1.2, 0.6], [2.5, -1.0]]);
        let expect = [0, 0, 1, 1];
        for (r, &c) in expect.iter().enumerate() {
            assert_eq!(m.predict(test.row(r)), c);
        }
    }

    #[test]
    fn deterministic() {
        let x = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0], [0.5, 0.5], [2.0, 2.0]]);
        let y = [0, 1, 2, 1];
        let p = MarginParams::default();
        assert_eq!(train_margin(&x, &y, 3, &p, 9).unwrap(), train_margin(&x, &y, 3, &p, 9).unwrap());
    }

    #[test]
    fn single_class() {
        let x = Matrix::from_rows(&[[0.0], [1.0]]);
        let m = train_margin(&x, &[2, 2], 3, &MarginParams::default(), 0).unwrap();
        assert_eq!(m.predict(&[50.0]), 2);
    }
}
