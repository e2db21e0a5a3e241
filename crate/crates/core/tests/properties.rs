use std::collections::BTreeSet;

use proptest::prelude::*;
use thermaltap::classify::{plurality_label, train_forest, ForestParams, Matrix};
use thermaltap::eval::{boundary, plan_lodo, plan_loso, plan_pooled, plan_transfer, seg_metrics, SessionInfo};
use thermaltap::features::{cell_stats, spatial_gradient, temporal_delta, FeatureSchema, GridSpec};
use thermaltap::frame_store::{parse_frame_csv, window_range, Environment, PhaseMarks, RadiometricFrame, SessionManifest};
use thermaltap::normalize::{ambient_correct, apply_headset_baseline, signature_ratio, wind_correct, HeadsetBaseline};
use thermaltap::roi::{Mask, MaskSource};

fn manifest(id: &str) -> SessionManifest {
    SessionManifest {
        session_id: id.into(),
        device_model: "quest3".into(),
        app_label: "vrfs".into(),
        environment: Environment::Indoor,
        phase_marks: PhaseMarks {
            baseline: 0,
            heat_up: 60_000,
            steady: 180_000,
            cool_down: 540_000,
        },
        sample_rate_hz: 1.0,
    }
}

proptest! {
    #[test]
    fn frame_csv_round_trip(micro in proptest::collection::vec(-40_000_000i64..150_000_000, 16 * 16)) {
        let temps: Vec<f64> = micro.iter().map(|&m| m as f64 / 1e6).collect();
        let frame = RadiometricFrame::new(5_000, 3, 16, 16, temps.clone()).unwrap();
        let back = parse_frame_csv(&frame.to_csv_string(), 5_000, 3).unwrap();
        for (a, b) in back.temps().iter().zip(&temps) {
            let declared: f64 = format!("{b:.6}").parse().unwrap();
            prop_assert_eq!(a.to_bits(), declared.to_bits());
        }
    }

    #[test]
    fn windows_partition_the_prefix(n in 0usize..700, w in 1usize..130) {
        let wins = window_range(&manifest("s"), 0..n, w, w);
        prop_assert_eq!(wins.len(), n / w);
        let mut seen = BTreeSet::new();
        for win in &wins {
            prop_assert_eq!(&win.label, "vrfs");
            for t in win.frame_range() {
                prop_assert!(seen.insert(t), "frame {} in two windows", t);
            }
        }
        prop_assert_eq!(seen, (0..(n / w) * w).collect::<BTreeSet<_>>());
    }

    #[test]
    fn gradient_is_offset_invariant(g in proptest::collection::vec(15.0f64..45.0, 36), c in -30.0f64..30.0) {
        let shifted: Vec<f64> = g.iter().map(|x| x + c).collect();
        for (a, b) in spatial_gradient(&g, 6).iter().zip(spatial_gradient(&shifted, 6)) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        let uniform = spatial_gradient(&[c; 36], 6);
        prop_assert!(uniform.iter().sum::<f64>().abs() < 1e-9);
    }

    #[test]
    fn delta_of_affine_series(a in -50.0f64..50.0, b in -2.0f64..2.0, lag in 1usize..40) {
        let s: Vec<f64> = (0..120).map(|t| a + b * t as f64).collect();
        for v in temporal_delta(&s, lag).into_iter().skip(lag) {
            prop_assert!((v - b * lag as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn ambient_and_wind_invariants(t in -20.0f64..80.0, amb in -20.0f64..45.0, c in -50.0f64..50.0,
                                   d in -10.0f64..10.0, v in 0.0f64..6.0, k in 0.0f64..2.0) {
        prop_assert!((ambient_correct(t + c, amb + c) - ambient_correct(t, amb)).abs() < 1e-9);
        let w = wind_correct(d, v, k);
        prop_assert_eq!(w.signum(), d.signum());
        prop_assert!(w.abs() >= d.abs());
    }

    #[test]
    fn baseline_round_trip(t in proptest::collection::vec(15.0f64..60.0, 16), b in proptest::collection::vec(15.0f64..40.0, 16)) {
        let base = HeadsetBaseline { device_model: "d".into(), n: 4, cells: b.clone(), counts: vec![1; 16] };
        let r = apply_headset_baseline(&t, &base);
        for ((res, bb), orig) in r.values.iter().zip(&b).zip(&t) {
            prop_assert!((res + bb - orig).abs() < 1e-9);
        }
    }

    #[test]
    fn ratio_is_scale_invariant(vs in proptest::collection::vec(proptest::collection::vec(0.1f64..5.0, 4), 8), s in 0.01f64..100.0) {
        let tag = |k: usize| (format!("app{}", k % 2), format!("dev{}", (k / 2) % 2));
        let samples: Vec<(String, String, Vec<f64>)> =
            vs.iter().enumerate().map(|(k, v)| { let (a, d) = tag(k); (a, d, v.clone()) }).collect();
        let scaled: Vec<(String, String, Vec<f64>)> =
            samples.iter().map(|(a, d, v)| (a.clone(), d.clone(), v.iter().map(|x| x * s).collect())).collect();
        let (r1, r2) = (signature_ratio(&samples).unwrap(), signature_ratio(&scaled).unwrap());
        prop_assert!((r1.sim_app - r2.sim_app).abs() < 1e-9);
        prop_assert!((r1.sim_dev - r2.sim_dev).abs() < 1e-9);
        prop_assert!((r1.ratio.unwrap() - r2.ratio.unwrap()).abs() < 1e-9 * r1.ratio.unwrap().abs().max(1.0));
    }

    #[test]
    fn coverage_threshold_is_monotone(bits in proptest::collection::vec(any::<bool>(), 24 * 24), lo in 0.05f64..1.0, hi in 0.05f64..1.0) {
        let (lo, hi) = (lo.min(hi), lo.max(hi));
        let mask = Mask::new(24, 24, bits, MaskSource::Ingested);
        let frame = RadiometricFrame::constant(0, 24, 24, 30.0).unwrap();
        let present = |cov: f64| {
            let g = GridSpec { n: 4, min_cell_coverage: cov };
            cell_stats(&frame, &mask, &g).iter().filter(|c| c.present).count()
        };
        prop_assert!(present(lo) >= present(hi));
    }
}

fn dist(a: (usize, usize), b: (usize, usize)) -> f64 {
    let (dr, dc) = (a.0 as f64 - b.0 as f64, a.1 as f64 - b.1 as f64);
    (dr * dr + dc * dc).sqrt()
}

/// Symmetric nearest-boundary distances by brute force.
fn surface_distances(a: &Mask, b: &Mask) -> Vec<f64> {
    let (ba, bb) = (boundary(a), boundary(b));
    let nearest = |p: (usize, usize), set: &[(usize, usize)]| set.iter().map(|&q| dist(p, q)).fold(f64::INFINITY, f64::min);
    ba.iter().map(|&p| nearest(p, &bb)).chain(bb.iter().map(|&p| nearest(p, &ba))).collect()
}

fn blob() -> impl Strategy<Value = Mask> {
    (0usize..14, 0usize..14, 1usize..10, 1usize..10, proptest::collection::vec(any::<bool>(), 24 * 24)).prop_map(
        |(r0, c0, h, w, noise)| {
            Mask::from_fn(24, 24, MaskSource::Ingested, |r, c| {
                ((r0..r0 + h).contains(&r) && (c0..c0 + w).contains(&c)) ^ (noise[r * 24 + c] && r % 7 == 0)
            })
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn segmentation_metric_relations(a in blob(), b in blob()) {
        let m = seg_metrics(&a, &b).unwrap();
        if a.area() + b.area() > 0 {
            prop_assert!((m.iou - m.dice / (2.0 - m.dice)).abs() < 1e-9);
        }
        if a.area() > 0 && b.area() > 0 {
            let d = surface_distances(&a, &b);
            let hd100 = d.iter().copied().fold(0.0, f64::max);
            let all_pairs = a.pixels().flat_map(|p| b.pixels().map(move |q| dist(p, q))).fold(0.0, f64::max);
            prop_assert!(m.hd95 <= hd100 + 1e-9);
            prop_assert!(m.asd <= hd100 + 1e-9);
            prop_assert!(m.hd95 <= all_pairs + 1e-9);
            prop_assert!((m.asd - d.iter().sum::<f64>() / d.len() as f64).abs() < 1e-9);
        }
    }
}

fn sessions(devices: usize, apps: usize, per: usize, env: Environment) -> Vec<SessionInfo> {
    let mut out = Vec::new();
    for d in 0..devices {
        for a in 0..apps {
            for k in 0..per {
                out.push(SessionInfo {
                    session_id: format!("d{d}_{:?}_a{a}_{k}", env),
                    device_model: format!("dev{d}"),
                    app_label: format!("app{a}"),
                    environment: env,
                });
            }
        }
    }
    out
}

fn assert_hygienic(plan: &thermaltap::eval::FoldPlan, all: &[SessionInfo]) {
    assert!(plan.is_hygienic());
    for f in &plan.folds {
        let test: BTreeSet<&String> = f.test.iter().collect();
        assert!(!test.is_empty());
        for s in f.train.iter().chain(&f.adaptation) {
            assert!(!test.contains(s), "{s} on both sides of fold {}", f.id);
        }
        let known: BTreeSet<&String> = all.iter().map(|s| &s.session_id).collect();
        assert!(f.train.iter().chain(&f.test).all(|s| known.contains(s)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn fold_plans_are_hygienic(devices in 2usize..4, apps in 2usize..5, per in 1usize..4, outdoor in 2usize..5, k in 0usize..2, seed in any::<u64>()) {
        let s = sessions(devices, apps, per, Environment::Indoor);
        let loso = plan_loso(&s).unwrap();
        prop_assert_eq!(loso.folds.len(), s.len());
        assert_hygienic(&loso, &s);
        assert_hygienic(&plan_pooled(&s).unwrap(), &s);
        let lodo = plan_lodo(&s).unwrap();
        prop_assert_eq!(lodo.folds.len(), devices);
        assert_hygienic(&lodo, &s);
        for f in &lodo.folds {
            let dev = |id: &String| s.iter().find(|x| &x.session_id == id).unwrap().device_model.clone();
            let test_devs: BTreeSet<String> = f.test.iter().map(dev).collect();
            prop_assert_eq!(test_devs.len(), 1);
            prop_assert!(f.train.iter().all(|id| !test_devs.contains(&dev(id))));
        }

        let indoor = sessions(1, apps, per, Environment::Indoor);
        let out = sessions(1, apps, outdoor, Environment::Outdoor);
        let all: Vec<SessionInfo> = indoor.iter().chain(&out).cloned().collect();
        let plan = plan_transfer(&indoor, &out, k, seed).unwrap();
        assert_hygienic(&plan, &all);
        prop_assert_eq!(&plan, &plan_transfer(&indoor, &out, k, seed).unwrap());
    }

    #[test]
    fn vote_ignores_window_order(labels in proptest::collection::vec(0usize..4, 1..40), perm_seed in any::<u64>()) {
        let names: Vec<String> = labels.iter().map(|l| format!("app{l}")).collect();
        let scores: Vec<(String, f64)> = (0..4).map(|l| (format!("app{l}"), 0.1 * l as f64)).collect();
        let mut shuffled = names.clone();
        // Fisher-Yates driven by a simple LCG keeps the test free of RNG crates.
        let mut x = perm_seed | 1;
        for i in (1..shuffled.len()).rev() {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (x >> 33) as usize % (i + 1));
        }
        prop_assert_eq!(plurality_label(&names, &scores), plurality_label(&shuffled, &scores));
    }
}

#[test]
fn vote_examples() {
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    assert_eq!(plurality_label(&s(&["A", "A", "B"]), &[]).unwrap(), "A");
    let scores = vec![("A".to_string(), 0.6), ("B".to_string(), 0.7)];
    assert_eq!(plurality_label(&s(&["A", "B"]), &scores).unwrap(), "B");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn forest_is_invariant_to_monotone_feature_maps(seed in any::<u64>(), feature in 0usize..4) {
        // Two noisy classes in 4 features; one column goes through a strictly
        // increasing map in both train and test.
        let mut x = seed | 1;
        let mut next = || {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            (x >> 11) as f64 / (1u64 << 53) as f64
        };
        let rows: Vec<(Vec<f64>, usize)> = (0..240)
            .map(|i| {
                let y = i % 2;
                ((0..4).map(|j| next() * 2.0 + if j < 2 { y as f64 * 0.8 } else { 0.0 }).collect(), y)
            })
            .collect();
        let warp = |r: &[f64]| {
            let mut r = r.to_vec();
            r[feature] = r[feature].powi(3) * 7.0 + r[feature].exp();
            r
        };
        let (train, test) = rows.split_at(160);
        let y: Vec<usize> = train.iter().map(|r| r.1).collect();
        let plain = Matrix::from_rows(&train.iter().map(|r| r.0.clone()).collect::<Vec<_>>());
        let warped = Matrix::from_rows(&train.iter().map(|r| warp(&r.0)).collect::<Vec<_>>());
        let p = ForestParams { trees: 25, ..ForestParams::default() };
        let fa = train_forest(&plain, &y, 2, &p, 11).unwrap();
        let fb = train_forest(&warped, &y, 2, &p, 11).unwrap();
        for (row, _) in test {
            prop_assert_eq!(fa.predict(row), fb.predict(&warp(row)));
        }
    }
}

#[test]
fn schema_names_for_default_grid() {
    let schema = FeatureSchema::new(16, &[5, 30]);
    let names = schema.names();
    let expected = 5 * 256 * 2 + 2 * 256 + 3;
    assert_eq!(expected, 3075);
    assert_eq!(names.len(), expected);
    assert_eq!(schema.len(), expected);
    assert_eq!(names.iter().collect::<BTreeSet<_>>().len(), expected);
    assert_eq!(names, FeatureSchema::new(16, &[5, 30]).names());
    let cells = names.iter().filter(|n| n.starts_with("cell_")).count();
    let deltas = names.iter().filter(|n| n.starts_with("delta")).count();
    assert_eq!((cells, deltas), (2560, 512));
    assert_eq!(&names[3072..], ["ambient_c_mean", "air_velocity_mean", "distance_cm_mean"]);
}
