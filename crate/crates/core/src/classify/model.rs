use std::cmp::Ordering;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    fit_preprocess, train_forest, train_margin, ClassifyError, ForestModel, ForestParams,
    MarginModel, MarginParams, Matrix, PreprocessConfig, PreprocessState,
};
use crate::frame_store::IDLE_LABEL;
use crate::util::mix_seed;

pub const MODEL_VERSION: &str = "thermaltap-model/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    #[default]
    Forest,
    Margin,
}

impl Backend {
    pub fn parse(s: &str) -> Option<Backend> {
        match s {
            "forest" => Some(Backend::Forest),
            "margin" => Some(Backend::Margin),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Backend::Forest => "forest",
            Backend::Margin => "margin",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainParams {
    pub backend: Backend,
    pub forest: ForestParams,
    pub margin: MarginParams,
    pub preprocess: PreprocessConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "lowercase")]
pub enum Classifier {
    Forest(ForestModel),
    Margin(MarginModel),
}

impl Classifier {
    pub fn train(
        x: &Matrix,
        y: &[usize],
        n_classes: usize,
        params: &TrainParams,
        seed: u64,
    ) -> Result<Classifier, ClassifyError> {
        Ok(match params.backend {
            Backend::Forest => Classifier::Forest(train_forest(x, y, n_classes, &params.forest, seed)?),
            Backend::Margin => Classifier::Margin(train_margin(x, y, n_classes, &params.margin, seed)?),
        })
    }

    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Classifier::Forest(m) => m.predict_proba(x),
            Classifier::Margin(m) => m.predict_proba(x),
        }
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        match self {
            Classifier::Forest(m) => m.predict(x),
            Classifier::Margin(m) => m.predict(x),
        }
    }
}

/// Shared preprocessing, an idle/active detector and an app classifier over
/// active apps only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStageModel {
    pub version: String,
    pub feature_names: Vec<String>,
    pub preprocess: PreprocessState,
    pub stage1: Classifier,
    /// Active app labels, sorted; stage-2 class `i` is `apps[i]`.
    pub apps: Vec<String>,
    pub stage2: Classifier,
}

impl TwoStageModel {
    /// Fit on window rows with string labels; rows labelled `home` are idle.
    pub fn fit(
        x: &Matrix,
        labels: &[String],
        feature_names: Vec<String>,
        params: &TrainParams,
        seed: u64,
    ) -> Result<TwoStageModel, ClassifyError> {
        assert_eq!(x.rows(), labels.len(), "one label per row");
        if feature_names.len() != x.cols() {
            return Err(ClassifyError::Train(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                x.cols()
            )));
        }
        let mut all: Vec<String> = labels.to_vec();
        all.sort();
        all.dedup();
        let y_all: Vec<usize> = labels
            .iter()
            .map(|l| all.binary_search(l).unwrap())
            .collect();
        let preprocess = fit_preprocess(x, &y_all, &params.preprocess)?;
        let z = preprocess.transform(x);

        let y1: Vec<usize> = labels.iter().map(|l| (l != IDLE_LABEL) as usize).collect();
        let stage1 = Classifier::train(&z, &y1, 2, params, mix_seed(seed, 1))?;

        let apps: Vec<String> = all.iter().filter(|l| *l != IDLE_LABEL).cloned().collect();
        if apps.is_empty() {
            return Err(ClassifyError::Train("no active-app windows in training data".into()));
        }
        let active: Vec<usize> = (0..labels.len()).filter(|&i| y1[i] == 1).collect();
        let y2: Vec<usize> = active
            .iter()
            .map(|&i| apps.binary_search(&labels[i]).unwrap())
            .collect();
        let stage2 = Classifier::train(&z.select_rows(&active), &y2, apps.len(), params, mix_seed(seed, 2))?;
        Ok(TwoStageModel {
            version: MODEL_VERSION.to_string(),
            feature_names,
            preprocess,
            stage1,
            apps,
            stage2,
        })
    }

    pub fn transform_row(&self, raw: &[f64]) -> Vec<f64> {
        self.preprocess.transform_row(raw)
    }

    /// Stage-1 window verdict on a transformed row; an exact tie counts as active.
    pub fn window_active(&self, z: &[f64]) -> bool {
        let p = self.stage1.predict_proba(z);
        p[1] >= p[0]
    }

    /// Stage-2 class scores on a transformed row, aligned with `apps`.
    pub fn app_scores(&self, z: &[f64]) -> Vec<f64> {
        self.stage2.predict_proba(z)
    }

    pub fn app_label(&self, z: &[f64]) -> &str {
        &self.apps[self.stage2.predict(z)]
    }

    pub fn save(&self, path: &Path) -> Result<(), ClassifyError> {
        let text = serde_json::to_string(self).map_err(|e| ClassifyError::Format(e.to_string()))?;
        fs::write(path, text).map_err(|e| ClassifyError::Io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<TwoStageModel, ClassifyError> {
        let text =
            fs::read_to_string(path).map_err(|e| ClassifyError::Io(path.display().to_string(), e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<TwoStageModel, ClassifyError> {
        #[derive(Deserialize)]
        struct Header {
            version: String,
        }
        let h: Header =
            serde_json::from_str(text).map_err(|e| ClassifyError::Format(e.to_string()))?;
        if h.version != MODEL_VERSION {
            return Err(ClassifyError::Version {
                found: h.version,
                expected: MODEL_VERSION.to_string(),
            });
        }
        serde_json::from_str(text).map_err(|e| ClassifyError::Format(e.to_string()))
    }
}

/// Per-window outcome. Stage-2 fields are empty when the session is idle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub session_id: String,
    pub window_start: usize,
    pub active: bool,
    pub stage2_label: Option<String>,
    pub stage2_scores: Option<Vec<f64>>,
    pub session_label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionPrediction {
    pub session_id: String,
    pub label: String,
    pub idle_votes: usize,
    pub active_votes: usize,
    pub records: Vec<PredictionRecord>,
}

/// Session is idle only when idle votes strictly outnumber active votes.
pub fn session_is_idle(idle_votes: usize, active_votes: usize) -> bool {
    idle_votes > active_votes
}

/// Plurality over window labels; ties go to the higher mean score across all
/// windows, then to the lexicographically smaller label.
pub fn plurality_label(labels: &[String], mean_scores: &[(String, f64)]) -> Option<String> {
    let mut counts: Vec<(&str, usize)> = Vec::new();
    for l in labels {
        match counts.iter_mut().find(|(k, _)| *k == l.as_str()) {
            Some(e) => e.1 += 1,
            None => counts.push((l.as_str(), 1)),
        }
    }
    let score = |l: &str| {
        mean_scores
            .iter()
            .find(|(k, _)| k == l)
            .map_or(f64::NEG_INFINITY, |(_, s)| *s)
    };
    counts
        .into_iter()
        .max_by(|a, b| {
            a.1.cmp(&b.1)
                .then_with(|| score(a.0).partial_cmp(&score(b.0)).unwrap_or(Ordering::Equal))
                .then_with(|| b.0.cmp(a.0))
        })
        .map(|(l, _)| l.to_string())
}

/// Two-stage inference over one session's surviving windows, given as
/// `(window_start, raw feature row)`.
pub fn two_stage_infer(
    session_id: &str,
    windows: &[(usize, Vec<f64>)],
    model: &TwoStageModel,
) -> Result<SessionPrediction, ClassifyError> {
    if windows.is_empty() {
        return Err(ClassifyError::SessionUnscorable(session_id.to_string()));
    }
    let z: Vec<Vec<f64>> = windows.iter().map(|(_, r)| model.transform_row(r)).collect();
    let active: Vec<bool> = z.iter().map(|r| model.window_active(r)).collect();
    let active_votes = active.iter().filter(|&&a| a).count();
    let idle_votes = active.len() - active_votes;

    let mut records: Vec<PredictionRecord> = windows
        .iter()
        .zip(&active)
        .map(|((start, _), &a)| PredictionRecord {
            session_id: session_id.to_string(),
            window_start: *start,
            active: a,
            stage2_label: None,
            stage2_scores: None,
            session_label: String::new(),
        })
        .collect();

    let label = if session_is_idle(idle_votes, active_votes) {
        IDLE_LABEL.to_string()
    } else {
        let scores: Vec<Vec<f64>> = z.iter().map(|r| model.app_scores(r)).collect();
        let labels: Vec<String> = scores
            .iter()
            .map(|s| model.apps[super::argmax(s)].clone())
            .collect();
        let n = scores.len() as f64;
        let means: Vec<(String, f64)> = model
            .apps
            .iter()
            .enumerate()
            .map(|(k, a)| (a.clone(), scores.iter().map(|s| s[k]).sum::<f64>() / n))
            .collect();
        for ((rec, l), s) in records.iter_mut().zip(&labels).zip(scores) {
            rec.stage2_label = Some(l.clone());
            rec.stage2_scores = Some(s);
        }
        plurality_label(&labels, &means).expect("non-empty windows")
    };
    for r in &mut records {
        r.session_label = label.clone();
    }
    Ok(SessionPrediction {
        session_id: session_id.to_string(),
        label,
        idle_votes,
        active_votes,
        records,
    })
}
