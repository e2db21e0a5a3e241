use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame_store::{Environment, SessionManifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Loso,
    Lodo,
    Pooled,
    Transfer,
}

impl Protocol {
    pub fn parse(s: &str) -> Option<Protocol> {
        match s {
            "loso" => Some(Protocol::Loso),
            "lodo" => Some(Protocol::Lodo),
            "pooled" => Some(Protocol::Pooled),
            "transfer" => Some(Protocol::Transfer),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Loso => "loso",
            Protocol::Lodo => "lodo",
            Protocol::Pooled => "pooled",
            Protocol::Transfer => "transfer",
        }
    }
}

/// What a planner needs to know about a session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub session_id: String,
    pub device_model: String,
    pub app_label: String,
    pub environment: Environment,
}

impl From<&SessionManifest> for SessionInfo {
    fn from(m: &SessionManifest) -> Self {
        Self {
            session_id: m.session_id.clone(),
            device_model: m.device_model.clone(),
            app_label: m.app_label.clone(),
            environment: m.environment,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub id: String,
    pub train: Vec<String>,
    pub test: Vec<String>,
    /// Few-shot target-domain sessions added to training.
    pub adaptation: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub protocol: Protocol,
    pub folds: Vec<Fold>,
}

impl FoldPlan {
    /// True when no fold's test session appears in its train or adaptation sets.
    pub fn is_hygienic(&self) -> bool {
        self.folds.iter().all(|f| {
            let test: BTreeSet<&String> = f.test.iter().collect();
            !f.train.iter().chain(&f.adaptation).any(|s| test.contains(s))
        })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlanError {
    #[error("need at least 2 sessions, got {0}")]
    TooFewSessions(usize),
    #[error("leave-one-device-out needs at least 2 device models, got {0}")]
    TooFewDevices(usize),
    #[error("duplicate session id {0}")]
    Duplicate(String),
    #[error("transfer needs indoor sessions for training")]
    NoSourceSessions,
    #[error("few-shot count {count} must be below the outdoor session count {available} of class {label}")]
    FewShot {
        label: String,
        count: usize,
        available: usize,
    },
}

fn sorted_unique(sessions: &[SessionInfo]) -> Result<Vec<&SessionInfo>, PlanError> {
    let mut v: Vec<&SessionInfo> = sessions.iter().collect();
    v.sort_by(|a, b| a.session_id.cmp(&b.session_id));
    for w in v.windows(2) {
        if w[0].session_id == w[1].session_id {
            return Err(PlanError::Duplicate(w[0].session_id.clone()));
        }
    }
    Ok(v)
}

fn loso(sessions: &[SessionInfo], protocol: Protocol) -> Result<FoldPlan, PlanError> {
    if sessions.len() < 2 {
        return Err(PlanError::TooFewSessions(sessions.len()));
    }
    let v = sorted_unique(sessions)?;
    let folds = v
        .iter()
        .map(|held| Fold {
            id: held.session_id.clone(),
            train: v
                .iter()
                .filter(|s| s.session_id != held.session_id)
                .map(|s| s.session_id.clone())
                .collect(),
            test: vec![held.session_id.clone()],
            adaptation: Vec::new(),
        })
        .collect();
    Ok(FoldPlan { protocol, folds })
}

/// One fold per session, in session-id order.
pub fn plan_loso(sessions: &[SessionInfo]) -> Result<FoldPlan, PlanError> {
    loso(sessions, Protocol::Loso)
}

/// Leave-one-session-out over a multi-device pool.
pub fn plan_pooled(sessions: &[SessionInfo]) -> Result<FoldPlan, PlanError> {
    loso(sessions, Protocol::Pooled)
}

/// One fold per device model, in model-name order.
pub fn plan_lodo(sessions: &[SessionInfo]) -> Result<FoldPlan, PlanError> {
    if sessions.len() < 2 {
        return Err(PlanError::TooFewSessions(sessions.len()));
    }
    let v = sorted_unique(sessions)?;
    let devices: BTreeSet<&str> = v.iter().map(|s| s.device_model.as_str()).collect();
    if devices.len() < 2 {
        return Err(PlanError::TooFewDevices(devices.len()));
    }
    let folds = devices
        .iter()
        .map(|d| {
            let (test, train): (Vec<&&SessionInfo>, Vec<&&SessionInfo>) =
                v.iter().partition(|s| s.device_model == *d);
            Fold {
                id: d.to_string(),
                train: train.iter().map(|s| s.session_id.clone()).collect(),
                test: test.iter().map(|s| s.session_id.clone()).collect(),
                adaptation: Vec::new(),
            }
        })
        .collect();
    Ok(FoldPlan {
        protocol: Protocol::Lodo,
        folds,
    })
}

/// Indoor-to-outdoor transfer: one fold training on all indoor sessions plus
/// `few_shot_count` outdoor sessions per class (zero-shot when 0), tested on
/// the remaining outdoor sessions. Adaptation sessions are picked by sorting
/// each class's outdoor ids and shuffling with `seed`.
pub fn plan_transfer(
    indoor: &[SessionInfo],
    outdoor: &[SessionInfo],
    few_shot_count: usize,
    seed: u64,
) -> Result<FoldPlan, PlanError> {
    if indoor.is_empty() {
        return Err(PlanError::NoSourceSessions);
    }
    if indoor.len() + outdoor.len() < 2 || outdoor.is_empty() {
        return Err(PlanError::TooFewSessions(indoor.len() + outdoor.len()));
    }
    let src = sorted_unique(indoor)?;
    let tgt = sorted_unique(outdoor)?;
    let mut by_class: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for s in &tgt {
        by_class.entry(&s.app_label).or_default().push(&s.session_id);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut adaptation = Vec::new();
    for (label, ids) in by_class.iter_mut() {
        if few_shot_count > 0 && few_shot_count >= ids.len() {
            return Err(PlanError::FewShot {
                label: label.to_string(),
                count: few_shot_count,
                available: ids.len(),
            });
        }
        ids.shuffle(&mut rng);
        adaptation.extend(ids[..few_shot_count].iter().map(|s| s.to_string()));
    }
    adaptation.sort();
    let test = tgt
        .iter()
        .map(|s| s.session_id.clone())
        .filter(|id| adaptation.binary_search(id).is_err())
        .collect();
    let id = if few_shot_count == 0 {
        "zero_shot".to_string()
    } else {
        format!("few_shot_{few_shot_count}")
    };
    Ok(FoldPlan {
        protocol: Protocol::Transfer,
        folds: vec![Fold {
            id,
            train: src.iter().map(|s| s.session_id.clone()).collect(),
            test,
            adaptation,
        }],
    })
}
