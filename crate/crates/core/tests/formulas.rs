//! Closed-form feature, normalization and metric formulas against oracles
//! computed directly in this file.

use thermaltap::classify::anova_f;
use thermaltap::eval::{classification_metrics, seg_metrics};
use thermaltap::features::{cell_stats, spatial_gradient, temporal_delta, GridSpec};
use thermaltap::frame_store::RadiometricFrame;
use thermaltap::normalize::{
    ambient_correct, apply_headset_baseline, delta_residual, wind_correct, DeltaTableBuilder,
    HeadsetBaseline,
};
use thermaltap::roi::{Mask, MaskSource};

const TOL: f64 = 1e-9;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL
}

/// Cell mean minus the mean of in-grid, non-missing 4-neighbours.
fn gradient_oracle(g: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![f64::NAN; n * n];
    for i in 0..n as i64 {
        for j in 0..n as i64 {
            let m = g[(i * n as i64 + j) as usize];
            if m.is_nan() {
                continue;
            }
            let nb: Vec<f64> = [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)]
                .into_iter()
                .filter(|&(a, b)| a >= 0 && b >= 0 && a < n as i64 && b < n as i64)
                .map(|(a, b)| g[(a * n as i64 + b) as usize])
                .filter(|v| !v.is_nan())
                .collect();
            if !nb.is_empty() {
                out[(i * n as i64 + j) as usize] = m - nb.iter().sum::<f64>() / nb.len() as f64;
            }
        }
    }
    out
}

#[test]
fn gradient_examples() {
    assert!(spatial_gradient(&[30.0; 9], 3).iter().all(|&g| g == 0.0));

    let mut g = vec![30.0; 9];
    g[4] = 35.0;
    assert!(close(spatial_gradient(&g, 3)[4], 5.0));

    // corner with neighbours 30 and 34
    let g = [32.0, 30.0, 34.0, f64::NAN];
    assert!(close(spatial_gradient(&g, 2)[0], 0.0));
}

#[test]
fn gradient_matches_direct_computation() {
    let n = 7;
    let g: Vec<f64> = (0..n * n)
        .map(|k| if k % 11 == 3 { f64::NAN } else { 20.0 + ((k * 37) % 13) as f64 * 0.731 })
        .collect();
    let got = spatial_gradient(&g, n);
    for (a, b) in got.iter().zip(gradient_oracle(&g, n)) {
        assert!((a.is_nan() && b.is_nan()) || close(*a, b), "{a} vs {b}");
    }
}

#[test]
fn deltas_of_a_ramp() {
    let s: Vec<f64> = (0..120).map(|t| 20.0 + 0.1 * t as f64).collect();
    for (lag, want) in [(5, 0.5), (30, 3.0)] {
        let d = temporal_delta(&s, lag);
        for (t, v) in d.iter().enumerate() {
            if t < lag {
                assert!(v.is_nan());
            } else {
                assert!(close(*v, want), "lag {lag} t {t}: {v}");
            }
        }
    }
    assert!(temporal_delta(&[21.0; 40], 30)[35] == 0.0);
    assert!(temporal_delta(&[1.0, 2.0, 3.0, 4.0], 5)[3].is_nan());
}

#[test]
fn cell_statistics_by_two_pass_oracle() {
    // 2 x 6 mask, n = 2: cell (0, 0) is the first three pixels of row 0.
    let (h, w) = (16, 16);
    let mut temps = vec![20.0; h * w];
    let pixels = [28.0, 30.0, 32.0];
    temps[..3].copy_from_slice(&pixels);
    let frame = RadiometricFrame::new(0, 0, h, w, temps).unwrap();
    let mask = Mask::from_fn(h, w, MaskSource::Ingested, |r, c| r < 2 && c < 6);
    let stats = cell_stats(&frame, &mask, &GridSpec::new(2).unwrap());

    let mean = pixels.iter().sum::<f64>() / 3.0;
    let var = pixels.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 3.0;
    let c = stats[0];
    assert!(c.present);
    assert_eq!((c.min, c.max), (28.0, 32.0));
    assert!(close(c.mean, mean));
    assert!(close(c.std, var.sqrt()));
    assert!(close(stats[1].mean, 20.0) && close(stats[1].std, 0.0));
}

#[test]
fn ambient_and_wind_corrections() {
    assert!(close(ambient_correct(35.0, 20.0), 15.0));
    assert!(close(ambient_correct(20.0, 20.0), 0.0));
    assert!(close(ambient_correct(40.0, 25.0), 15.0));
    assert!(close(wind_correct(2.0, 1.5, 0.1), 2.0 + 2.0 * 0.1 * 1.5));
    assert!(close(wind_correct(2.0, 0.0, 0.9), 2.0));
    assert!(close(wind_correct(-1.0, 2.0, 0.25), -1.5));
}

#[test]
fn baseline_and_delta_residuals() {
    let b = HeadsetBaseline {
        device_model: "quest3".into(),
        n: 2,
        cells: vec![27.5, f64::NAN, 0.0, 1.25],
        counts: vec![5, 0, 5, 5],
    };
    let r = apply_headset_baseline(&[30.0, 31.0, 22.0, 1.25], &b);
    assert!(close(r.values[0], 2.5));
    assert_eq!(r.values[1], 31.0);
    assert!(close(r.values[2], 22.0) && close(r.values[3], 0.0));
    assert_eq!(r.unbaselined, vec![1]);

    let mut t = DeltaTableBuilder::new(2);
    t.add("vrfs", 5, &[0.5, 0.2, 0.0, 0.0]);
    let table = t.build();
    assert!(close(delta_residual(0.8, &table, "vrfs", 0, 5).unwrap(), 0.3));
    assert!(close(delta_residual(0.2, &table, "vrfs", 1, 5).unwrap(), 0.0));
    assert!(delta_residual(0.8, &table, "beat_saber", 0, 5).is_none());
}

/// One-way ANOVA straight from group statistics.
fn anova_oracle(groups: &[&[f64]]) -> f64 {
    let all: Vec<f64> = groups.iter().flat_map(|g| g.iter().copied()).collect();
    let grand = all.iter().sum::<f64>() / all.len() as f64;
    let (mut ssb, mut ssw) = (0.0, 0.0);
    for g in groups {
        let m = g.iter().sum::<f64>() / g.len() as f64;
        ssb += g.len() as f64 * (m - grand).powi(2);
        ssw += g.iter().map(|x| (x - m).powi(2)).sum::<f64>();
    }
    let (dfb, dfw) = ((groups.len() - 1) as f64, (all.len() - groups.len()) as f64);
    (ssb / dfb) / (ssw / dfw)
}

#[test]
fn anova_f_scores() {
    let f = anova_f(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[0, 0, 0, 1, 1, 1]).unwrap();
    assert!(close(f, 13.5));
    assert!(close(anova_oracle(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]), 13.5));

    let a = [0.3, 1.7, 2.2, 0.9];
    let b = [1.1, 2.5, 3.0];
    let c = [4.2, 3.3, 5.1, 4.4, 3.9];
    let col: Vec<f64> = a.iter().chain(&b).chain(&c).copied().collect();
    let lab: Vec<usize> = [0; 4].iter().chain(&[1; 3]).chain(&[2; 5]).copied().collect();
    assert!(close(anova_f(&col, &lab).unwrap(), anova_oracle(&[&a, &b, &c])));

    assert_eq!(anova_f(&[1.0, 3.0, 3.0, 1.0], &[0, 0, 1, 1]).unwrap(), 0.0);
    assert_eq!(anova_f(&[1.0, 1.0, 2.0, 2.0], &[0, 0, 1, 1]).unwrap(), f64::INFINITY);
}

fn mask(h: usize, w: usize, on: &[(usize, usize)]) -> Mask {
    let mut m = Mask::empty(h, w, MaskSource::Ingested);
    for &(r, c) in on {
        m.set(r, c, true);
    }
    m
}

#[test]
fn overlap_metrics() {
    // |A| = |B| = 100 with 50 shared pixels
    let a = Mask::from_fn(20, 20, MaskSource::Ingested, |r, c| r < 10 && c < 10);
    let b = Mask::from_fn(20, 20, MaskSource::Ingested, |r, c| r < 10 && (5..15).contains(&c));
    let m = seg_metrics(&a, &b).unwrap();
    assert!(close(m.dice, 0.5));
    assert!(close(m.iou, 50.0 / 150.0));
    assert!(close(m.iou, m.dice / (2.0 - m.dice)));

    let same = seg_metrics(&a, &a).unwrap();
    assert_eq!((same.dice, same.iou, same.hd95, same.asd), (1.0, 1.0, 0.0, 0.0));
}

#[test]
fn surface_distances_on_hand_built_masks() {
    let a = mask(5, 8, &[(2, 1)]);
    let b = mask(5, 8, &[(2, 4)]);
    let m = seg_metrics(&a, &b).unwrap();
    assert!(close(m.hd95, 3.0) && close(m.asd, 3.0));

    // Single pixel against a 1 x 3 bar: the pixel sees distance 1 to the bar,
    // the bar pixels see 1, sqrt(2) ... enumerated by hand below.
    let a = mask(6, 6, &[(1, 2)]);
    let b = mask(6, 6, &[(2, 1), (2, 2), (2, 3)]);
    let d = [1.0, 2f64.sqrt(), 1.0, 2f64.sqrt()];
    let m = seg_metrics(&a, &b).unwrap();
    assert!(close(m.asd, d.iter().sum::<f64>() / 4.0));
    assert!(close(m.hd95, 2f64.sqrt()));
}

#[test]
fn weighted_f1_by_hand() {
    let r = classification_metrics(&["A", "A", "B", "B"], &["A", "B", "B", "B"], &["A".into(), "B".into()]).unwrap();
    let a = r.class("A").unwrap();
    let b = r.class("B").unwrap();
    assert!(close(a.precision, 1.0) && close(a.recall, 0.5) && close(a.f1, 2.0 / 3.0));
    assert!(close(b.precision, 2.0 / 3.0) && close(b.recall, 1.0) && close(b.f1, 0.8));
    assert!(close(r.weighted_f1, 0.5 * (2.0 / 3.0) + 0.5 * 0.8));
    assert!(close(r.accuracy, 0.75));

    let r = classification_metrics(&["A", "B"], &["A", "B"], &["A".into(), "B".into(), "C".into()]).unwrap();
    assert!(close(r.weighted_f1, 1.0));
}
