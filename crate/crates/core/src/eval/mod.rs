//! Fold planning, classification and segmentation metrics, experiment
//! orchestration and report emission.

mod experiment;
mod metrics;
mod pipeline;
mod plan;
mod report;
mod seg;

use thiserror::Error;

pub use experiment::{
    plan_for, run_experiment, ExperimentReport, FoldStats, FoldSummary, ImportanceSummary,
    SessionOutcome, ACTIVE, IDLE,
};
pub use metrics::{
    classification_metrics, report_from_confusion, ClassMetrics, ClassificationReport,
    ConfusionMatrix, MeanStd, MetricsError,
};
pub use pipeline::{
    assemble_all, session_windows, FittedPipeline, Normalizers, TrainingSession, PIPELINE_VERSION,
};
pub use plan::{
    plan_lodo, plan_loso, plan_pooled, plan_transfer, Fold, FoldPlan, PlanError, Protocol,
    SessionInfo,
};
pub use report::{bar_chart, heatmap, line_chart, load_report, render_report, write_report_json};
pub use seg::{boundary, seg_metrics, squared_distance_map, SegMetrics, ShapeError};

use crate::config::ConfigError;

pub const REPORT_VERSION: &str = "thermaltap-report/1";
pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("fold {fold} failed: {message}")]
    Fold { fold: String, message: String },
    #[error("plan references unknown session {0}")]
    UnknownSession(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
}
