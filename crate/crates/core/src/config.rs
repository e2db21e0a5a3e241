//! Run configuration shared by the command line and the experiment runner.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{Backend, ForestParams, MarginParams, PreprocessConfig, TrainParams};
use crate::eval::Protocol;
use crate::features::DEFAULT_LAGS;
use crate::frame_store::Phase;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid run config: {0}")]
pub struct ConfigError(pub String);

/// Which corrections the feature pipeline applies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Normalization {
    pub ambient: bool,
    pub wind: bool,
    pub delta_residual: bool,
    pub headset_baseline: bool,
}

impl Normalization {
    /// Parse a comma list such as `ambient,wind`; `none` or an empty string disables all.
    pub fn parse(s: &str) -> Result<Normalization, ConfigError> {
        let mut n = Normalization::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty() && *p != "none") {
            match part {
                "ambient" => n.ambient = true,
                "wind" => n.wind = true,
                "delta_residual" => n.delta_residual = true,
                "headset_baseline" => n.headset_baseline = true,
                "all" => {
                    n = Normalization {
                        ambient: true,
                        wind: true,
                        delta_residual: true,
                        headset_baseline: true,
                    }
                }
                other => return Err(ConfigError(format!("unknown normalization {other:?}"))),
            }
        }
        Ok(n)
    }
}

/// Everything that determines an experiment's output. Serialized verbatim
/// into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: PathBuf,
    pub grid_n: usize,
    pub window_s: u32,
    pub stride_s: u32,
    pub lags: Vec<usize>,
    /// Protocol phases windows are drawn from.
    pub phases: Vec<Phase>,
    pub backend: Backend,
    pub forest: ForestParams,
    pub margin: MarginParams,
    pub preprocess: PreprocessConfig,
    pub normalization: Normalization,
    pub protocol: Protocol,
    pub few_shot_count: usize,
    pub seed: u64,
    /// Shuffle active-window labels before planning; a chance-level control.
    pub permute_labels: bool,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: PathBuf::new(),
            grid_n: 16,
            window_s: 10,
            stride_s: 10,
            lags: DEFAULT_LAGS.to_vec(),
            phases: vec![Phase::Steady],
            backend: Backend::Forest,
            forest: ForestParams::default(),
            margin: MarginParams::default(),
            preprocess: PreprocessConfig::default(),
            normalization: Normalization::default(),
            protocol: Protocol::Loso,
            few_shot_count: 0,
            seed: 7,
            permute_labels: false,
            out: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn train_params(&self) -> TrainParams {
        TrainParams {
            backend: self.backend,
            forest: self.forest,
            margin: self.margin,
            preprocess: self.preprocess,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |m: String| Err(ConfigError(m));
        if self.grid_n < 1 {
            return fail("grid n must be at least 1".into());
        }
        if self.window_s == 0 || self.stride_s == 0 {
            return fail("window and stride must be positive".into());
        }
        if self.lags.is_empty() || self.lags.contains(&0) {
            return fail("lags must be a non-empty list of positive seconds".into());
        }
        if self.phases.is_empty() {
            return fail("at least one phase must be selected".into());
        }
        if self.forest.trees == 0 || self.forest.max_depth == 0 || self.forest.min_leaf == 0 {
            return fail("forest trees, depth and leaf size must be positive".into());
        }
        if self.margin.epochs == 0 || !(self.margin.lambda > 0.0) {
            return fail("margin epochs and lambda must be positive".into());
        }
        if self.preprocess.max_selected == 0 || !(self.preprocess.variance_threshold >= 0.0) {
            return fail("feature selection needs K > 0 and a non-negative variance threshold".into());
        }
        if self.few_shot_count > 0 && self.protocol != Protocol::Transfer {
            return fail("few-shot count only applies to the transfer protocol".into());
        }
        Ok(())
    }
}
