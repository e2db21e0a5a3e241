use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use thermaltap::config::RunConfig;
use thermaltap::eval::{
    line_chart, load_report, plan_for, render_report, run_experiment, seg_metrics,
    session_windows, write_report_json, ExperimentReport, FittedPipeline, TrainingSession,
    REPORT_VERSION, TOOLKIT_VERSION,
};
use thermaltap::features::{assemble_window_features, write_feature_csv, FeatureSchema, WindowOptions};
use thermaltap::frame_store::SessionDir;
use thermaltap::roi::{segment_classical, SegmentConfig};
use thermaltap::synth::{generate_dataset, SuiteSpec};

use crate::args::{EvalArgs, InferArgs, PipelineArgs, ReportArgs, SegmentArgs, SynthArgs};
use crate::data::{load, load_features, session_dirs};
use crate::Usage;

fn create_out(out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    let mut spec = match a.suite.as_str() {
        "default" => SuiteSpec::default_suite(),
        "cross_device" => SuiteSpec::cross_device(8),
        "indoor_outdoor" => SuiteSpec::indoor_outdoor(8, 6),
        path => SuiteSpec::load(Path::new(path)).with_context(|| format!("reading suite {path}"))?,
    };
    if let Some(h) = a.height {
        spec.height = h;
        spec.width = a.width.unwrap_or(h * 4 / 3);
    } else if let Some(w) = a.width {
        spec.width = w;
    }
    if let Some(n) = a.sessions {
        spec.groups.iter_mut().for_each(|g| g.sessions = n);
    }
    spec.validate().map_err(|e| Usage(e.to_string()))?;
    let dirs = generate_dataset(&spec, a.seed.seed, &a.out)?;
    println!("wrote {} sessions to {}", dirs.len(), a.out.display());
    Ok(())
}

#[derive(Serialize)]
struct SegRow {
    session_id: String,
    frames: usize,
    scored: usize,
    dice: f64,
    iou: f64,
    hd95: f64,
    asd: f64,
}

pub fn segment(a: &SegmentArgs) -> Result<()> {
    let dirs = session_dirs(&a.dataset)?;
    create_out(&a.out)?;
    let seg = SegmentConfig { contrast_c: a.contrast };
    let rows: Vec<SegRow> = dirs
        .par_iter()
        .map(|d| -> Result<SegRow> {
            let rec = load(d)?;
            let out_dir = SessionDir::new(a.out.join(&rec.manifest.session_id));
            if a.write_masks {
                fs::create_dir_all(out_dir.masks())?;
            }
            let (mut sums, mut scored) = ([0.0f64; 4], 0usize);
            for (i, frame) in rec.frames.iter().enumerate() {
                let Some(env) = rec.env[i] else { continue };
                let pred = segment_classical(frame, env.ambient_c, &seg);
                if a.write_masks {
                    pred.write_csv(&out_dir.mask_path(frame.timestamp_ms()))?;
                }
                if let Some(truth) = &rec.masks[i] {
                    let m = seg_metrics(&pred, truth)?;
                    if m.hd95.is_finite() {
                        for (s, v) in sums.iter_mut().zip([m.dice, m.iou, m.hd95, m.asd]) {
                            *s += v;
                        }
                        scored += 1;
                    }
                }
            }
            let mean = |k: usize| if scored > 0 { sums[k] / scored as f64 } else { f64::NAN };
            Ok(SegRow {
                session_id: rec.manifest.session_id.clone(),
                frames: rec.len(),
                scored,
                dice: mean(0),
                iou: mean(1),
                hd95: mean(2),
                asd: mean(3),
            })
        })
        .collect::<Result<_>>()?;
    let path = a.out.join("segmentation.csv");
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    println!("scored {} sessions; summary in {}", rows.len(), path.display());
    Ok(())
}

pub fn extract(a: &PipelineArgs) -> Result<()> {
    let (grids, windows) = (a.grids()?, a.windows()?);
    let cfgs: Vec<(usize, u32, RunConfig)> = grids
        .iter()
        .flat_map(|&g| windows.iter().map(move |&w| (g, w)))
        .map(|(g, w)| a.run_config(g, w).map(|c| (g, w, c)))
        .collect::<Result<_>>()?;
    let norm = cfgs[0].2.normalization;
    if norm.wind || norm.headset_baseline || norm.delta_residual {
        log::warn!("wind, baseline and residual corrections are fitted per training split; extract applies only ambient");
    }
    let by_grid = load_features(&a.dataset, &grids, &a.segment_config(), a.ignore_masks)?;
    create_out(&a.out)?;
    for (g, w, cfg) in &cfgs {
        let sessions = &by_grid[grids.iter().position(|x| x == g).expect("grid listed")];
        let schema = FeatureSchema::new(*g, &cfg.lags);
        let opts = WindowOptions {
            ambient: norm.ambient,
            ..Default::default()
        };
        let mut vectors = Vec::new();
        let mut dropped = 0;
        for s in sessions {
            for win in session_windows(s, cfg) {
                match assemble_window_features(&win, s, &schema, &opts) {
                    Ok(v) => vectors.push(v),
                    Err(_) => dropped += 1,
                }
            }
        }
        let path = a.out.join(format!("features_n{g}_w{w}.csv"));
        let file = fs::File::create(&path).with_context(|| format!("writing {}", path.display()))?;
        write_feature_csv(std::io::BufWriter::new(file), &schema.names(), &vectors)?;
        println!("{}: {} windows ({} dropped)", path.display(), vectors.len(), dropped);
    }
    Ok(())
}

pub fn train(a: &PipelineArgs) -> Result<()> {
    let cfg = a.single_config("train")?;
    let sessions = load_features(&a.dataset, &[cfg.grid_n], &a.segment_config(), a.ignore_masks)?.remove(0);
    let windows: Vec<_> = sessions.iter().map(|s| session_windows(s, &cfg)).collect();
    let training: Vec<TrainingSession<'_>> = sessions
        .iter()
        .zip(&windows)
        .map(|(session, w)| TrainingSession {
            session,
            windows: w,
            cached: None,
        })
        .collect();
    let pipe = FittedPipeline::fit(&training, &[], &cfg, cfg.seed)?;
    create_out(&a.out)?;
    let path = a.out.join("pipeline.json");
    pipe.save(&path)?;
    for w in &pipe.warnings {
        log::warn!("{w}");
    }
    println!(
        "trained on {} windows ({} features kept); wrote {}",
        pipe.train_windows,
        pipe.model.preprocess.k(),
        path.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct WindowRow<'a> {
    session_id: &'a str,
    window_start: usize,
    active: bool,
    stage2_label: &'a str,
    session_label: &'a str,
}

#[derive(Serialize)]
struct SessionRow<'a> {
    session_id: &'a str,
    truth: &'a str,
    predicted: &'a str,
    idle_votes: usize,
    active_votes: usize,
}

pub fn infer(a: &InferArgs) -> Result<()> {
    let pipe = FittedPipeline::load(&a.model)?;
    let cfg = pipe.config().clone();
    let seg = SegmentConfig { contrast_c: a.contrast };
    let sessions = load_features(&a.dataset, &[cfg.grid_n], &seg, a.ignore_masks)?.remove(0);
    create_out(&a.out)?;
    let mut preds = Vec::new();
    for s in &sessions {
        let windows = session_windows(s, &cfg);
        let vectors = pipe.session_vectors(s, &windows, None)?;
        match pipe.infer_vectors(&s.manifest.session_id, &vectors) {
            Ok(p) => preds.push((s.manifest.app_label.as_str(), p)),
            Err(e) => log::warn!("{e}"),
        }
    }
    let path = a.out.join("windows.csv");
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
    for (_, p) in &preds {
        for r in &p.records {
            w.serialize(WindowRow {
                session_id: &r.session_id,
                window_start: r.window_start,
                active: r.active,
                stage2_label: r.stage2_label.as_deref().unwrap_or(""),
                session_label: &r.session_label,
            })?;
        }
    }
    w.flush()?;
    let path = a.out.join("sessions.csv");
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
    let mut correct = 0;
    for (truth, p) in &preds {
        correct += (*truth == p.label) as usize;
        w.serialize(SessionRow {
            session_id: &p.session_id,
            truth,
            predicted: &p.label,
            idle_votes: p.idle_votes,
            active_votes: p.active_votes,
        })?;
    }
    w.flush()?;
    println!("labelled {} sessions ({correct} match their manifest label)", preds.len());
    Ok(())
}

#[derive(Serialize)]
struct SweepRow {
    grid: usize,
    window_s: u32,
    app_accuracy: f64,
    app_weighted_f1: f64,
    app_accuracy_fold_mean: f64,
    app_accuracy_fold_std: f64,
    activity_accuracy: f64,
    active_recall: f64,
    session_accuracy: f64,
    report: String,
}

#[derive(Serialize)]
struct Sweep<'a> {
    report_version: &'a str,
    toolkit_version: &'a str,
    rows: &'a [SweepRow],
}

fn sweep_row(r: &ExperimentReport, report: &Path) -> SweepRow {
    let app = r.app_windows.as_ref();
    let fold = r.fold_stats.app_accuracy;
    SweepRow {
        grid: r.config.grid_n,
        window_s: r.config.window_s,
        app_accuracy: r.app_accuracy(),
        app_weighted_f1: app.map_or(0.0, |a| a.weighted_f1),
        app_accuracy_fold_mean: fold.map_or(f64::NAN, |m| m.mean),
        app_accuracy_fold_std: fold.map_or(f64::NAN, |m| m.std),
        activity_accuracy: r.activity.as_ref().map_or(0.0, |a| a.accuracy),
        active_recall: r
            .activity
            .as_ref()
            .and_then(|a| a.class(thermaltap::eval::ACTIVE))
            .map_or(0.0, |c| c.recall),
        session_accuracy: r.sessions.as_ref().map_or(0.0, |a| a.accuracy),
        report: report.display().to_string(),
    }
}

pub fn eval(a: &EvalArgs) -> Result<()> {
    let p = &a.pipeline;
    let protocol = a.protocol()?;
    let (grids, windows) = (p.grids()?, p.windows()?);
    let mut cfgs = Vec::new();
    for &g in &grids {
        for &w in &windows {
            let mut c = p.run_config(g, w)?;
            c.protocol = protocol;
            c.few_shot_count = a.few_shot;
            c.permute_labels = a.permute_labels;
            c.validate().map_err(|e| Usage(e.to_string()))?;
            cfgs.push(c);
        }
    }
    let by_grid = load_features(&p.dataset, &grids, &p.segment_config(), p.ignore_masks)?;
    // Invalid plans (e.g. one device under lodo) are usage errors, caught before any training.
    let plan = plan_for(&by_grid[0], &cfgs[0]).map_err(|e| Usage(e.to_string()))?;
    create_out(&p.out)?;
    let sweep = cfgs.len() > 1;
    let mut rows = Vec::new();
    for cfg in &cfgs {
        let sessions = &by_grid[grids.iter().position(|&g| g == cfg.grid_n).expect("grid listed")];
        let report = run_experiment(sessions, &plan, cfg)?;
        for w in &report.warnings {
            log::warn!("{w}");
        }
        let dir: PathBuf = if sweep {
            p.out.join(format!("grid{}_window{}", cfg.grid_n, cfg.window_s))
        } else {
            p.out.clone()
        };
        let path = write_report_json(&report, &dir)?;
        render_report(&report, &dir)?;
        let row = sweep_row(&report, &path);
        println!(
            "grid {:>2} window {:>3}s: app accuracy {:.4}, weighted F1 {:.4}, active recall {:.4}, session accuracy {:.4}",
            row.grid, row.window_s, row.app_accuracy, row.app_weighted_f1, row.active_recall, row.session_accuracy
        );
        rows.push(row);
    }
    if sweep {
        write_sweep(&p.out, &rows, &grids, &windows)?;
    }
    Ok(())
}

fn write_sweep(out: &Path, rows: &[SweepRow], grids: &[usize], windows: &[u32]) -> Result<()> {
    write_json(
        &out.join("sweep.json"),
        &Sweep {
            report_version: REPORT_VERSION,
            toolkit_version: TOOLKIT_VERSION,
            rows,
        },
    )?;
    let mut w = csv::Writer::from_path(out.join("sweep.csv"))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    let (xs, label, series): (Vec<f64>, &str, Vec<(String, Vec<f64>)>) = if grids.len() >= windows.len() {
        let xs = grids.iter().map(|&g| g as f64).collect();
        let series = windows
            .iter()
            .map(|&w| {
                let ys = grids
                    .iter()
                    .map(|&g| rows.iter().find(|r| r.grid == g && r.window_s == w).map_or(f64::NAN, |r| r.app_accuracy))
                    .collect();
                (format!("W={w}s"), ys)
            })
            .collect();
        (xs, "grid n", series)
    } else {
        let xs = windows.iter().map(|&w| w as f64).collect();
        let series = grids
            .iter()
            .map(|&g| {
                let ys = windows
                    .iter()
                    .map(|&w| rows.iter().find(|r| r.grid == g && r.window_s == w).map_or(f64::NAN, |r| r.app_accuracy))
                    .collect();
                (format!("n={g}"), ys)
            })
            .collect();
        (xs, "window (s)", series)
    };
    fs::write(out.join("sweep.svg"), line_chart("Window-level app accuracy", label, &xs, &series))?;
    Ok(())
}

pub fn report(a: &ReportArgs) -> Result<()> {
    if !a.input.is_file() {
        bail!("report {} does not exist", a.input.display());
    }
    let report = load_report(&a.input)?;
    let files = render_report(&report, &a.out)?;
    println!("wrote {} files to {}", files.len(), a.out.display());
    Ok(())
}
