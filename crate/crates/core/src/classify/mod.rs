//! Train-only preprocessing, the forest and margin backends, two-stage
//! inference with majority voting, and importance grid maps.

mod anova;
mod forest;
mod importance;
mod margin;
mod matrix;
mod model;
mod preprocess;

use thiserror::Error;

pub use anova::anova_f;
pub use forest::{train_forest, ForestModel, ForestParams, Node, Tree};
pub use importance::{feature_cell, feature_importance, map_to_grid, GridImportance};
pub use margin::{train_margin, MarginModel, MarginParams};
pub use matrix::Matrix;
pub use model::{
    plurality_label, session_is_idle, two_stage_infer, Backend, Classifier, PredictionRecord,
    SessionPrediction, TrainParams, TwoStageModel, MODEL_VERSION,
};
pub use preprocess::{
    fit_preprocess, PreprocessConfig, PreprocessState, DEFAULT_MAX_SELECTED, NETD_VARIANCE,
};

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("ANOVA needs at least 2 non-empty groups, found {0}")]
    Groups(usize),
    #[error("preprocessing failed: {0}")]
    Preprocess(String),
    #[error("training failed: {0}")]
    Train(String),
    #[error("session {0} has no surviving windows")]
    SessionUnscorable(String),
    #[error("model version {found} does not match {expected}")]
    Version { found: String, expected: String },
    #[error("malformed model: {0}")]
    Format(String),
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
}

/// Index of the largest value; the first one wins ties.
pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}
