use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::NormalizeError;

/// Cross-device versus within-device similarity of application signatures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignatureRatio {
    /// Mean cosine between centroids of the same app on different devices.
    pub sim_app: f64,
    /// Mean cosine between centroids of different apps on the same device.
    pub sim_dev: f64,
    /// `sim_app / sim_dev`; `None` when `sim_dev` is zero.
    pub ratio: Option<f64>,
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Signature ratio over `(app, device, vector)` samples, using per-(app, device)
/// centroids. Needs at least two apps and two devices and no missing values.
pub fn signature_ratio(samples: &[(String, String, Vec<f64>)]) -> Result<SignatureRatio, NormalizeError> {
    let mut sums: BTreeMap<(&str, &str), (Vec<f64>, usize)> = BTreeMap::new();
    for (app, dev, v) in samples {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(NormalizeError::Ratio("vectors must be imputed (finite)".into()));
        }
        let e = sums
            .entry((app.as_str(), dev.as_str()))
            .or_insert_with(|| (vec![0.0; v.len()], 0));
        if e.0.len() != v.len() {
            return Err(NormalizeError::Ratio("vector length mismatch".into()));
        }
        for (acc, x) in e.0.iter_mut().zip(v) {
            *acc += x;
        }
        e.1 += 1;
    }
    let apps: BTreeSet<&str> = sums.keys().map(|k| k.0).collect();
    let devices: BTreeSet<&str> = sums.keys().map(|k| k.1).collect();
    if apps.len() < 2 || devices.len() < 2 {
        return Err(NormalizeError::Ratio(format!(
            "need >= 2 apps and >= 2 devices, found {} and {}",
            apps.len(),
            devices.len()
        )));
    }
    let centroids: Vec<((&str, &str), Vec<f64>)> = sums
        .into_iter()
        .map(|(k, (s, c))| (k, s.into_iter().map(|x| x / c as f64).collect()))
        .collect();
    let (mut app_sum, mut app_n, mut dev_sum, mut dev_n) = (0.0, 0usize, 0.0, 0usize);
    for (i, (ka, va)) in centroids.iter().enumerate() {
        for (kb, vb) in &centroids[i + 1..] {
            if ka.0 == kb.0 && ka.1 != kb.1 {
                app_sum += cosine(va, vb);
                app_n += 1;
            } else if ka.0 != kb.0 && ka.1 == kb.1 {
                dev_sum += cosine(va, vb);
                dev_n += 1;
            }
        }
    }
    let mean = |s: f64, n: usize| if n > 0 { s / n as f64 } else { f64::NAN };
    let (sim_app, sim_dev) = (mean(app_sum, app_n), mean(dev_sum, dev_n));
    let ratio = (sim_dev != 0.0 && sim_dev.is_finite() && sim_app.is_finite()).then(|| sim_app / sim_dev);
    Ok(SignatureRatio {
        sim_app,
        sim_dev,
        ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(app: &str, dev: &str, v: &[f64]) -> (String, String, Vec<f64>) {
        (app.into(), dev.into(), v.to_vec())
    }

    #[test]
    fn identical_centroids_give_unit_ratio() {
        let v = [1.0, 2.0, 3.0];
        let r = signature_ratio(&[s("a", "d1", &v), s("a", "d2", &v), s("b", "d1", &v), s("b", "d2", &v)])
            .unwrap();
        assert!((r.sim_app - 1.0).abs() < 1e-12);
        assert!((r.sim_dev - 1.0).abs() < 1e-12);
        assert!((r.ratio.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_apps_make_ratio_undefined() {
        let r = signature_ratio(&[
            s("a", "d1", &[1.0, 0.0]),
            s("a", "d2", &[1.0, 0.0]),
            s("b", "d1", &[0.0, 1.0]),
            s("b", "d2", &[0.0, 1.0]),
        ])
        .unwrap();
        assert_eq!(r.sim_dev, 0.0);
        assert_eq!(r.ratio, None);
    }

    #[test]
    fn too_few_groups() {
        assert!(signature_ratio(&[s("a", "d1", &[1.0]), s("b", "d1", &[1.0])]).is_err());
        assert!(signature_ratio(&[s("a", "d1", &[f64::NAN]), s("b", "d2", &[1.0])]).is_err());
    }
}
