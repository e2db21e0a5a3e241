//! End-to-end acceptance run: one pass/fail line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the lines reach the
//! terminal. `THERMALTAP_ACCEPTANCE=1,5` restricts the run to some criteria.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::sync::OnceLock;
use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use thermaltap::classify::anova_f;
use thermaltap::config::{Normalization, RunConfig};
use thermaltap::eval::{plan_for, run_experiment, seg_metrics, ExperimentReport, Protocol};
use thermaltap::features::{spatial_gradient, temporal_delta, GridSpec, SessionFeatures, GRID_SWEEP};
use thermaltap::normalize::{ambient_correct, apply_headset_baseline, wind_correct, HeadsetBaseline};
use thermaltap::roi::{mask_geometry, validate_mask, Mask, MaskQuality, MaskSource};
use thermaltap::synth::{simulate_features, PhaseDurations, SuiteSpec};

const WINDOW_SWEEP: [u32; 6] = [10, 20, 30, 60, 90, 120];
const TOL: f64 = 1e-9;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn synth(spec: &SuiteSpec, seed: u64, n: usize) -> Vec<SessionFeatures> {
    let grid = GridSpec::new(n).unwrap();
    spec.sessions(seed)
        .iter()
        .map(|p| simulate_features(p, spec, &[grid]).unwrap().remove(0))
        .collect()
}

/// The default suite at n = 16, shared by several criteria.
fn default_16() -> &'static [SessionFeatures] {
    static CELL: OnceLock<Vec<SessionFeatures>> = OnceLock::new();
    CELL.get_or_init(|| synth(&SuiteSpec::default_suite(), 7, 16))
}

fn run(sessions: &[SessionFeatures], cfg: &RunConfig) -> ExperimentReport {
    let plan = plan_for(sessions, cfg).unwrap();
    assert!(plan.is_hygienic());
    run_experiment(sessions, &plan, cfg).unwrap()
}

fn cfg(grid_n: usize, trees: usize) -> RunConfig {
    let mut c = RunConfig {
        grid_n,
        ..RunConfig::default()
    };
    c.forest.trees = trees;
    c
}

fn headline() -> (Verdict, Verdict) {
    let t = Instant::now();
    let report = run(default_16(), &cfg(16, 300));
    let secs = t.elapsed().as_secs_f64();
    let app = report.app_windows.as_ref().unwrap();
    let act = report.activity.as_ref().unwrap();
    let active = act.class("active").unwrap().recall;
    let home = act.class("idle").unwrap().recall;
    (
        verdict(
            app.accuracy >= 0.90 && app.weighted_f1 >= 0.88 && secs <= 600.0,
            format!("accuracy {:.4}, weighted F1 {:.4}, {secs:.0} s", app.accuracy, app.weighted_f1),
        ),
        verdict(active >= 0.95, format!("active recall {active:.4}, home recall {home:.4}")),
    )
}

fn grid_sweep() -> Verdict {
    let spec = SuiteSpec::default_suite();
    let mut acc = Vec::new();
    for n in GRID_SWEEP {
        let owned;
        let sessions = if n == 16 {
            default_16()
        } else {
            owned = synth(&spec, 7, n);
            &owned
        };
        acc.push((n, run(sessions, &cfg(n, 300)).app_accuracy()));
    }
    let table: Vec<String> = acc.iter().map(|(n, a)| format!("n={n}: {a:.4}")).collect();
    let at = |n: usize| acc.iter().find(|(m, _)| *m == n).unwrap().1;
    verdict(at(16) >= at(4), table.join(", "))
}

fn window_sweep() -> Verdict {
    let sessions = default_16();
    let mut acc = Vec::new();
    for w in WINDOW_SWEEP {
        let mut c = cfg(16, 300);
        c.window_s = w;
        c.stride_s = w;
        acc.push(run(sessions, &c).app_accuracy());
    }
    let spread = acc.iter().copied().fold(f64::MIN, f64::max) - acc.iter().copied().fold(f64::MAX, f64::min);
    let table: Vec<String> = WINDOW_SWEEP.iter().zip(&acc).map(|(w, a)| format!("{w}s: {a:.4}")).collect();
    verdict(spread <= 0.08, format!("spread {spread:.4} ({})", table.join(", ")))
}

fn cross_device() -> Verdict {
    let sessions = synth(&SuiteSpec::cross_device(4), 7, 16);
    let mut c = cfg(16, 300);
    c.protocol = Protocol::Pooled;
    let pooled = run(&sessions, &c).app_accuracy();
    c.protocol = Protocol::Lodo;
    let lodo = run(&sessions, &c).app_accuracy();
    verdict(
        pooled - lodo >= 0.30,
        format!("pooled {pooled:.4}, zero-shot LODO {lodo:.4}, gap {:.4}", pooled - lodo),
    )
}

fn outdoor_transfer() -> Verdict {
    let spec = SuiteSpec::indoor_outdoor(6, 4);
    let mut zero_below = true;
    let mut worst_drop = f64::MIN;
    let mut gains = Vec::new();
    let mut rows = Vec::new();
    for seed in 0..5u64 {
        let sessions = synth(&spec, seed, 16);
        let mut c = cfg(16, 300);
        c.seed = seed;
        c.protocol = Protocol::Transfer;
        let zero = run(&sessions, &c).app_accuracy();
        c.few_shot_count = 2;
        let few = run(&sessions, &c);
        c.normalization = Normalization::parse("ambient,wind").unwrap();
        let norm = run(&sessions, &c);
        let (f_raw, f_norm) = (
            few.app_windows.as_ref().unwrap().weighted_f1,
            norm.app_windows.as_ref().unwrap().weighted_f1,
        );
        zero_below &= zero < few.app_accuracy();
        worst_drop = worst_drop.max(f_raw - f_norm);
        gains.push(f_norm - f_raw);
        rows.push(format!("seed {seed}: zero {zero:.3} few {:.3} F1 {f_raw:.4}->{f_norm:.4}", few.app_accuracy()));
    }
    let mean_gain = gains.iter().sum::<f64>() / gains.len() as f64;
    for r in &rows {
        println!("    {r}");
    }
    verdict(
        zero_below && worst_drop <= 0.02 && mean_gain > 0.0,
        format!("mean F1 gain {mean_gain:+.4}, worst drop {worst_drop:.4}"),
    )
}

fn formulas() -> Verdict {
    let close = |a: f64, b: f64| (a - b).abs() <= TOL;
    let mut failed = Vec::new();
    let mut check = |name: &str, ok: bool| {
        if !ok {
            failed.push(name.to_string());
        }
    };
    let mut g = vec![30.0; 9];
    check("gradient uniform", spatial_gradient(&g, 3).iter().all(|&v| v == 0.0));
    g[4] = 35.0;
    check("gradient hot centre", close(spatial_gradient(&g, 3)[4], 5.0));
    check("gradient corner", close(spatial_gradient(&[32.0, 30.0, 34.0, f64::NAN], 2)[0], 0.0));
    let ramp: Vec<f64> = (0..120).map(|t| 20.0 + 0.1 * t as f64).collect();
    check("delta 5", close(temporal_delta(&ramp, 5)[50], 0.5));
    check("delta 30", close(temporal_delta(&ramp, 30)[50], 3.0));
    check("delta flat", temporal_delta(&[21.0; 40], 30)[35] == 0.0);
    check("ambient", close(ambient_correct(35.0, 20.0), 15.0) && close(ambient_correct(40.0, 25.0), 15.0));
    check("wind", close(wind_correct(2.0, 1.5, 0.1), 2.3) && close(wind_correct(2.0, 0.0, 0.9), 2.0));
    let b = HeadsetBaseline {
        device_model: "quest3".into(),
        n: 1,
        cells: vec![27.5],
        counts: vec![5],
    };
    check("baseline", close(apply_headset_baseline(&[30.0], &b).values[0], 2.5));
    check(
        "anova 13.5",
        close(anova_f(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[0, 0, 0, 1, 1, 1]).unwrap(), 13.5),
    );
    let a = Mask::from_fn(20, 20, MaskSource::Ingested, |r, c| r < 10 && c < 10);
    let m = Mask::from_fn(20, 20, MaskSource::Ingested, |r, c| r < 10 && (5..15).contains(&c));
    let s = seg_metrics(&a, &m).unwrap();
    check("dice", close(s.dice, 0.5));
    check("iou identity", close(s.iou, s.dice / (2.0 - s.dice)));
    let px = |r, c| Mask::from_fn(5, 8, MaskSource::Ingested, move |i, j| (i, j) == (r, c));
    let s = seg_metrics(&px(2, 1), &px(2, 4)).unwrap();
    check("hd95/asd", close(s.hd95, 3.0) && close(s.asd, 3.0));
    let ok = failed.is_empty();
    verdict(ok, if ok { "14 checks exact to 1e-9".into() } else { format!("failed: {}", failed.join(", ")) })
}

fn quality(aspect_ratio: f64, solidity: f64) -> MaskQuality {
    MaskQuality {
        component_area: 100,
        bbox: (0, 0, 9, 9),
        aspect_ratio,
        solidity,
        valid: false,
    }
}

fn cases() -> PropConfig {
    PropConfig {
        failure_persistence: None,
        ..PropConfig::with_cases(100)
    }
}

fn geometry() -> Verdict {
    let examples = validate_mask(&quality(1.5, 0.90)) && !validate_mask(&quality(1.0, 0.95)) && !validate_mask(&quality(2.0, 0.70));
    let rect = (1usize..20, 1usize..30, 0usize..10, 0usize..10);
    let mut runner = TestRunner::new(cases());
    let translation = runner.run(&(rect.clone(), 0usize..30, 0usize..30), |((rh, rw, r0, c0), dr, dc)| {
        let m = Mask::rect(64, 80, r0, c0, r0 + rh, c0 + rw);
        let (a, b) = (mask_geometry(&m), mask_geometry(&m.translated(dr as isize, dc as isize)));
        prop_assert_eq!((a.aspect_ratio, a.solidity, a.valid), (b.aspect_ratio, b.solidity, b.valid));
        Ok(())
    });
    let mut runner = TestRunner::new(cases());
    let scale = runner.run(&(rect, 1usize..5), |((rh, rw, r0, c0), s)| {
        let m = Mask::rect(40, 50, r0, c0, r0 + rh, c0 + rw);
        let (a, b) = (mask_geometry(&m), mask_geometry(&m.scaled(s)));
        prop_assert!((a.aspect_ratio - b.aspect_ratio).abs() < 1e-12);
        prop_assert_eq!(b.component_area, a.component_area * s * s);
        Ok(())
    });
    verdict(
        examples && translation.is_ok() && scale.is_ok(),
        format!(
            "examples {}, translation {}, scale {} (100 cases each)",
            ok(examples),
            ok(translation.is_ok()),
            ok(scale.is_ok())
        ),
    )
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "FAILED"
    }
}

fn hygiene_and_permutation() -> Verdict {
    // Fold hygiene over every protocol on small suites.
    let tiny = |spec: SuiteSpec| SuiteSpec {
        height: 48,
        width: 64,
        ..spec
    };
    let devices = synth(&tiny(SuiteSpec::cross_device(2)), 1, 4);
    let outdoor = synth(&tiny(SuiteSpec::indoor_outdoor(3, 3)), 1, 4);
    let mut hygienic = true;
    for (sessions, protocol, few) in [
        (&devices, Protocol::Pooled, 0),
        (&devices, Protocol::Lodo, 0),
        (&outdoor, Protocol::Loso, 0),
        (&outdoor, Protocol::Transfer, 2),
    ] {
        let c = RunConfig {
            grid_n: 4,
            protocol,
            few_shot_count: few,
            ..RunConfig::default()
        };
        let plan = plan_for(sessions, &c).unwrap();
        hygienic &= plan.is_hygienic();
        for f in &plan.folds {
            let test: BTreeSet<&String> = f.test.iter().collect();
            hygienic &= !f.train.iter().chain(&f.adaptation).any(|s| test.contains(s));
        }
    }

    let mut c = cfg(16, 300);
    c.permute_labels = true;
    let acc = run(default_16(), &c).app_accuracy();
    let chance = 1.0 / 6.0;
    verdict(
        hygienic && (acc - chance).abs() <= 0.08,
        format!("fold hygiene {}, permuted accuracy {acc:.4} (chance {chance:.4})", ok(hygienic)),
    )
}

fn cli(args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_thermaltap")).args(args).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn reports_under(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().is_some_and(|n| n == "report.json") {
                out.push((p.display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let out = tmp.path().join("out");
    let (data_s, out_s) = (data.to_str().unwrap(), out.to_str().unwrap());
    // Short sessions keep the on-disk dataset small.
    let mut spec = SuiteSpec {
        height: 48,
        width: 64,
        phases: PhaseDurations {
            baseline_s: 20,
            heat_up_s: 40,
            steady_s: 60,
            cool_down_s: 10,
        },
        ..SuiteSpec::indoor_outdoor(2, 3)
    };
    spec.name = "determinism".into();
    let suite = tmp.path().join("suite.json");
    spec.save(&suite).unwrap();
    cli(&["synth", "--suite", suite.to_str().unwrap(), "--seed", "11", "--out", data_s]);
    let experiments: [&[&str]; 3] = [
        &["--protocol", "loso", "--grid", "4,8", "--window", "10"],
        &["--protocol", "transfer", "--few-shot", "2", "--normalize", "ambient,wind"],
        &["--protocol", "loso", "--backend", "margin", "--permute-labels"],
    ];
    let mut identical = true;
    let mut count = 0;
    for extra in experiments {
        let mut args = vec!["eval", "--dataset", data_s, "--out", out_s, "--trees", "20", "--seed", "5"];
        args.extend_from_slice(extra);
        let mut runs = Vec::new();
        for _ in 0..2 {
            let _ = fs::remove_dir_all(&out);
            cli(&args);
            runs.push(reports_under(&out));
        }
        count += runs[0].len();
        identical &= !runs[0].is_empty() && runs[0] == runs[1];
    }
    verdict(identical, format!("{count} report.json files compared byte for byte"))
}

type Criterion = (u32, &'static str, fn() -> Verdict);

fn record(results: &mut Vec<bool>, k: u32, name: &str, v: Verdict, secs: f64) {
    let tag = if v.pass { "PASS" } else { "FAIL" };
    println!("criterion {k:>2} {tag} {name}: {} [{secs:.0} s]", v.detail);
    results.push(v.pass);
}

fn main() -> ExitCode {
    let only: Option<BTreeSet<u32>> = std::env::var("THERMALTAP_ACCEPTANCE")
        .ok()
        .map(|s| s.split(',').filter_map(|p| p.trim().parse().ok()).collect());
    let wanted = |k: u32| only.as_ref().is_none_or(|s| s.contains(&k));
    let mut results = Vec::new();
    if wanted(1) || wanted(2) {
        let t = Instant::now();
        let (loso, stages) = headline();
        let secs = t.elapsed().as_secs_f64();
        for (k, name, v) in [(1, "default suite LOSO", loso), (2, "two-stage active recall", stages)] {
            if wanted(k) {
                record(&mut results, k, name, v, secs);
            }
        }
    }
    let rest: [Criterion; 8] = [
        (3, "grid sweep", grid_sweep),
        (4, "window sweep", window_sweep),
        (5, "pooled vs zero-shot devices", cross_device),
        (6, "indoor to outdoor transfer", outdoor_transfer),
        (7, "formula suite", formulas),
        (8, "geometric filters", geometry),
        (9, "fold hygiene and label permutation", hygiene_and_permutation),
        (10, "CLI determinism", determinism),
    ];
    for (k, name, f) in rest {
        if wanted(k) {
            let t = Instant::now();
            let v = f();
            record(&mut results, k, name, v, t.elapsed().as_secs_f64());
        }
    }
    let failed = results.iter().filter(|p| !**p).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
