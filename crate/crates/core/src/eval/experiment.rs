use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{classification_metrics, ClassificationReport, MeanStd};
use super::pipeline::{assemble_all, session_windows, FittedPipeline, TrainingSession};
use super::plan::{plan_lodo, plan_loso, plan_pooled, plan_transfer, Fold, FoldPlan, Protocol, SessionInfo};
use super::{EvalError, REPORT_VERSION, TOOLKIT_VERSION};
use crate::classify::{feature_importance, map_to_grid, Classifier, GridImportance};
use crate::config::RunConfig;
use crate::features::{FeatureSchema, FeatureVector, SessionFeatures, WindowOptions};
use crate::frame_store::{Environment, ObservationWindow, IDLE_LABEL};
use crate::util::mix_seed;

const PERMUTE_STREAM: u64 = 0x7065_726d;
pub const ACTIVE: &str = "active";
pub const IDLE: &str = "idle";

/// Per-fold numbers; `None` where the fold had nothing to score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub id: String,
    pub train_sessions: usize,
    pub test_sessions: usize,
    pub train_windows: usize,
    pub test_windows: usize,
    pub app_accuracy: Option<f64>,
    pub app_weighted_f1: Option<f64>,
    pub activity_accuracy: Option<f64>,
    pub session_accuracy: Option<f64>,
    pub wind_k: Option<f64>,
    pub selected_features: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionOutcome {
    pub fold: String,
    pub session_id: String,
    pub truth: String,
    pub predicted: String,
    pub idle_votes: usize,
    pub active_votes: usize,
}

/// Across-fold mean and population std of the per-fold numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldStats {
    pub app_accuracy: Option<MeanStd>,
    pub app_weighted_f1: Option<MeanStd>,
    pub activity_accuracy: Option<MeanStd>,
    pub session_accuracy: Option<MeanStd>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceSummary {
    pub grid: GridImportance,
    /// Highest mean importances, descending.
    pub top_features: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub report_version: String,
    pub toolkit_version: String,
    pub config: RunConfig,
    pub protocol: Protocol,
    pub classes: Vec<String>,
    /// Stage 2 applied to every truly active test window.
    pub app_windows: Option<ClassificationReport>,
    /// Stage 1 over all test windows, classes `idle` and `active`.
    pub activity: Option<ClassificationReport>,
    /// Session majority vote over all test sessions.
    pub sessions: Option<ClassificationReport>,
    pub fold_stats: FoldStats,
    pub folds: Vec<FoldSummary>,
    pub session_predictions: Vec<SessionOutcome>,
    pub importance: Option<ImportanceSummary>,
    pub dropped_windows: usize,
    pub warnings: Vec<String>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Window-level accuracy on active apps, 0 when nothing was scored.
    pub fn app_accuracy(&self) -> f64 {
        self.app_windows.as_ref().map_or(0.0, |r| r.accuracy)
    }
}

/// Fold plan for `cfg.protocol` over the given sessions. Transfer splits by
/// environment (indoor trains, outdoor tests).
pub fn plan_for(sessions: &[SessionFeatures], cfg: &RunConfig) -> Result<FoldPlan, EvalError> {
    let infos: Vec<SessionInfo> = sessions.iter().map(|s| SessionInfo::from(&s.manifest)).collect();
    let plan = match cfg.protocol {
        Protocol::Loso => plan_loso(&infos)?,
        Protocol::Lodo => plan_lodo(&infos)?,
        Protocol::Pooled => plan_pooled(&infos)?,
        Protocol::Transfer => {
            let (indoor, outdoor): (Vec<SessionInfo>, Vec<SessionInfo>) =
                infos.into_iter().partition(|s| s.environment == Environment::Indoor);
            plan_transfer(&indoor, &outdoor, cfg.few_shot_count, cfg.seed)?
        }
    };
    Ok(plan)
}

struct Prepared<'a> {
    sessions: &'a [SessionFeatures],
    index: BTreeMap<&'a str, usize>,
    windows: Vec<Vec<ObservationWindow>>,
    /// Vectors without fold-dependent corrections, when none are configured.
    cached: Option<Vec<Vec<FeatureVector>>>,
    dropped: usize,
}

fn prepare<'a>(sessions: &'a [SessionFeatures], cfg: &RunConfig) -> Result<Prepared<'a>, EvalError> {
    let mut index = BTreeMap::new();
    for (i, s) in sessions.iter().enumerate() {
        if s.n != cfg.grid_n {
            return Err(EvalError::Data(format!(
                "session {} has grid {} but the run uses {}",
                s.manifest.session_id, s.n, cfg.grid_n
            )));
        }
        if index.insert(s.manifest.session_id.as_str(), i).is_some() {
            return Err(EvalError::Data(format!("duplicate session {}", s.manifest.session_id)));
        }
    }
    let mut windows: Vec<Vec<ObservationWindow>> = sessions.iter().map(|s| session_windows(s, cfg)).collect();
    if cfg.permute_labels {
        let mut slots: Vec<(usize, usize)> = Vec::new();
        for (i, ws) in windows.iter().enumerate() {
            slots.extend((0..ws.len()).filter(|&j| ws[j].label != IDLE_LABEL).map(|j| (i, j)));
        }
        let mut labels: Vec<String> = slots.iter().map(|&(i, j)| windows[i][j].label.clone()).collect();
        labels.shuffle(&mut ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, PERMUTE_STREAM)));
        for (&(i, j), l) in slots.iter().zip(labels) {
            windows[i][j].label = l;
        }
    }
    let mut dropped = 0;
    let cached = if cfg.normalization.wind || cfg.normalization.headset_baseline {
        // counted once here even though folds re-assemble
        for (s, ws) in sessions.iter().zip(&windows) {
            dropped += ws.iter().filter(|w| w.frame_range().filter(|&t| s.frames[t].is_some()).count() * 2 < w.len).count();
        }
        None
    } else {
        let schema = FeatureSchema::new(cfg.grid_n, &cfg.lags);
        let opts = WindowOptions {
            ambient: cfg.normalization.ambient,
            wind_k: None,
            baseline: None,
        };
        Some(
            sessions
                .iter()
                .zip(&windows)
                .map(|(s, ws)| {
                    let (v, d) = assemble_all(s, ws, &schema, &opts);
                    dropped += d;
                    v
                })
                .collect(),
        )
    };
    Ok(Prepared {
        sessions,
        index,
        windows,
        cached,
        dropped,
    })
}

struct FoldOutcome {
    summary: FoldSummary,
    app_truth: Vec<String>,
    app_pred: Vec<String>,
    act_truth: Vec<&'static str>,
    act_pred: Vec<&'static str>,
    sessions: Vec<SessionOutcome>,
    importance: Option<Vec<(String, f64)>>,
    warnings: Vec<String>,
}

fn accuracy<S: PartialEq>(a: &[S], b: &[S]) -> Option<f64> {
    if a.is_empty() {
        return None;
    }
    Some(a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / a.len() as f64)
}

fn run_fold(
    prep: &Prepared<'_>,
    fold_index: usize,
    fold: &Fold,
    cfg: &RunConfig,
    classes: &[String],
) -> Result<FoldOutcome, EvalError> {
    let lookup = |id: &String| {
        prep.index
            .get(id.as_str())
            .copied()
            .ok_or_else(|| EvalError::UnknownSession(id.clone()))
    };
    let train: Vec<usize> = fold.train.iter().chain(&fold.adaptation).map(lookup).collect::<Result<_, _>>()?;
    let test: Vec<usize> = fold.test.iter().map(lookup).collect::<Result<_, _>>()?;
    let cached = |i: usize| prep.cached.as_ref().map(|c| c[i].as_slice());
    let training: Vec<TrainingSession<'_>> = train
        .iter()
        .map(|&i| TrainingSession {
            session: &prep.sessions[i],
            windows: &prep.windows[i],
            cached: cached(i),
        })
        .collect();
    // Devices seen only at test time are calibrated from their own idle sessions.
    let train_idle: BTreeSet<&str> = train
        .iter()
        .map(|&i| &prep.sessions[i].manifest)
        .filter(|m| m.is_idle())
        .map(|m| m.device_model.as_str())
        .collect();
    let calibration: Vec<&SessionFeatures> = if cfg.normalization.headset_baseline {
        let unseen: BTreeSet<&str> = test
            .iter()
            .map(|&i| prep.sessions[i].manifest.device_model.as_str())
            .filter(|d| !train_idle.contains(d))
            .collect();
        prep.sessions
            .iter()
            .filter(|s| s.manifest.is_idle() && unseen.contains(s.manifest.device_model.as_str()))
            .collect()
    } else {
        Vec::new()
    };
    let pipe = FittedPipeline::fit(&training, &calibration, cfg, mix_seed(cfg.seed, fold_index as u64))?;
    drop(training);
    let model = &pipe.model;

    let mut out = FoldOutcome {
        summary: FoldSummary {
            id: fold.id.clone(),
            train_sessions: train.len(),
            test_sessions: test.len(),
            train_windows: pipe.train_windows,
            test_windows: 0,
            app_accuracy: None,
            app_weighted_f1: None,
            activity_accuracy: None,
            session_accuracy: None,
            wind_k: pipe.normalizers.wind_k,
            selected_features: model.preprocess.k(),
        },
        app_truth: Vec::new(),
        app_pred: Vec::new(),
        act_truth: Vec::new(),
        act_pred: Vec::new(),
        sessions: Vec::new(),
        importance: None,
        warnings: pipe.warnings.iter().map(|w| format!("fold {}: {w}", fold.id)).collect(),
    };
    for &i in &test {
        let manifest = &prep.sessions[i].manifest;
        let vectors = match pipe.session_vectors(&prep.sessions[i], &prep.windows[i], cached(i)) {
            Ok(v) => v,
            Err(e) => {
                out.warnings.push(format!("fold {}: {e}", fold.id));
                continue;
            }
        };
        let pred = match pipe.infer_vectors(&manifest.session_id, &vectors) {
            Ok(p) => p,
            Err(e) => {
                out.warnings.push(format!("fold {}: {e}", fold.id));
                continue;
            }
        };
        out.summary.test_windows += vectors.len();
        for (v, rec) in vectors.iter().zip(&pred.records) {
            let truly_active = v.label != IDLE_LABEL;
            out.act_truth.push(if truly_active { ACTIVE } else { IDLE });
            out.act_pred.push(if rec.active { ACTIVE } else { IDLE });
            if truly_active {
                out.app_truth.push(v.label.clone());
                out.app_pred.push(model.app_label(&model.transform_row(&v.values)).to_string());
            }
        }
        out.sessions.push(SessionOutcome {
            fold: fold.id.clone(),
            session_id: manifest.session_id.clone(),
            truth: manifest.app_label.clone(),
            predicted: pred.label,
            idle_votes: pred.idle_votes,
            active_votes: pred.active_votes,
        });
    }
    out.summary.app_accuracy = accuracy(&out.app_truth, &out.app_pred);
    if !out.app_truth.is_empty() {
        let apps: Vec<String> = classes.iter().filter(|c| *c != IDLE_LABEL).cloned().collect();
        out.summary.app_weighted_f1 = classification_metrics(&out.app_truth, &out.app_pred, &apps)
            .ok()
            .map(|r| r.weighted_f1);
    }
    out.summary.activity_accuracy = accuracy(&out.act_truth, &out.act_pred);
    let st: Vec<&String> = out.sessions.iter().map(|s| &s.truth).collect();
    let sp: Vec<&String> = out.sessions.iter().map(|s| &s.predicted).collect();
    out.summary.session_accuracy = accuracy(&st, &sp);
    if let Classifier::Forest(f) = &model.stage2 {
        out.importance = Some(feature_importance(f, &model.preprocess, &model.feature_names));
    }
    Ok(out)
}

fn stat(values: impl Iterator<Item = Option<f64>>) -> Option<MeanStd> {
    MeanStd::of(&values.flatten().collect::<Vec<f64>>())
}

/// Run every fold of `plan` and aggregate. Folds run in parallel when the
/// `parallel` feature is on; results are reduced in fold order, so the report
/// does not depend on scheduling.
pub fn run_experiment(
    sessions: &[SessionFeatures],
    plan: &FoldPlan,
    cfg: &RunConfig,
) -> Result<ExperimentReport, EvalError> {
    cfg.validate()?;
    let prep = prepare(sessions, cfg)?;
    let mut in_plan = BTreeSet::new();
    for f in &plan.folds {
        for id in f.train.iter().chain(&f.test).chain(&f.adaptation) {
            let i = *prep.index.get(id.as_str()).ok_or_else(|| EvalError::UnknownSession(id.clone()))?;
            in_plan.insert(i);
        }
    }
    let classes: Vec<String> = in_plan
        .iter()
        .map(|&i| sessions[i].manifest.app_label.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let run = |(k, f): (usize, &Fold)| {
        run_fold(&prep, k, f, cfg, &classes).map_err(|e| EvalError::Fold {
            fold: f.id.clone(),
            message: e.to_string(),
        })
    };
    #[cfg(feature = "parallel")]
    let results: Vec<Result<FoldOutcome, EvalError>> = {
        use rayon::prelude::*;
        plan.folds.par_iter().enumerate().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<FoldOutcome, EvalError>> = plan.folds.iter().enumerate().map(run).collect();
    let outcomes: Vec<FoldOutcome> = results.into_iter().collect::<Result<_, _>>()?;

    let apps: Vec<String> = classes.iter().filter(|c| *c != IDLE_LABEL).cloned().collect();
    let (mut at, mut ap, mut it, mut ip) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut session_predictions = Vec::new();
    let mut warnings = Vec::new();
    let mut imp_sum: BTreeMap<String, f64> = BTreeMap::new();
    let mut imp_folds = 0usize;
    let mut folds = Vec::new();
    for o in outcomes {
        at.extend(o.app_truth);
        ap.extend(o.app_pred);
        it.extend(o.act_truth);
        ip.extend(o.act_pred);
        session_predictions.extend(o.sessions);
        warnings.extend(o.warnings);
        if let Some(imp) = o.importance {
            imp_folds += 1;
            for (name, v) in imp {
                *imp_sum.entry(name).or_default() += v;
            }
        }
        folds.push(o.summary);
    }
    let app_windows = (!at.is_empty())
        .then(|| classification_metrics(&at, &ap, &apps))
        .transpose()?;
    let activity = (!it.is_empty())
        .then(|| classification_metrics(&it, &ip, &[IDLE.to_string(), ACTIVE.to_string()]))
        .transpose()?;
    let st: Vec<&str> = session_predictions.iter().map(|s| s.truth.as_str()).collect();
    let sp: Vec<&str> = session_predictions.iter().map(|s| s.predicted.as_str()).collect();
    let sessions_report = (!st.is_empty())
        .then(|| classification_metrics(&st, &sp, &classes))
        .transpose()?;
    let importance = (imp_folds > 0).then(|| {
        let mean: Vec<(String, f64)> = imp_sum.into_iter().map(|(k, v)| (k, v / imp_folds as f64)).collect();
        let mut top = mean.clone();
        top.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        top.truncate(20);
        ImportanceSummary {
            grid: map_to_grid(&mean, cfg.grid_n),
            top_features: top,
        }
    });
    let fold_stats = FoldStats {
        app_accuracy: stat(folds.iter().map(|f| f.app_accuracy)),
        app_weighted_f1: stat(folds.iter().map(|f| f.app_weighted_f1)),
        activity_accuracy: stat(folds.iter().map(|f| f.activity_accuracy)),
        session_accuracy: stat(folds.iter().map(|f| f.session_accuracy)),
    };
    Ok(ExperimentReport {
        report_version: REPORT_VERSION.to_string(),
        toolkit_version: TOOLKIT_VERSION.to_string(),
        config: cfg.clone(),
        protocol: plan.protocol,
        classes,
        app_windows,
        activity,
        sessions: sessions_report,
        fold_stats,
        folds,
        session_predictions,
        importance,
        dropped_windows: prep.dropped,
        warnings,
    })
}
