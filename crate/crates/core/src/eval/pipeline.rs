use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::classify::{two_stage_infer, ClassifyError, Matrix, SessionPrediction, TwoStageModel};
use crate::config::RunConfig;
use crate::features::{
    assemble_window_features, fill_residuals, wind_observations, FeatureSchema, FeatureVector,
    SessionFeatures, WindowOptions, CONTEXT_FEATURES,
};
use crate::frame_store::{window_phases, Environment, ObservationWindow};
use crate::normalize::{
    fit_wind_coefficient, BaselineStore, DeltaBaselineTable, DeltaTableBuilder, HeadsetBaseline,
};

pub const PIPELINE_VERSION: &str = "thermaltap-pipeline/1";

/// One training session with its windows, and optionally vectors already
/// assembled without fold-dependent corrections.
pub struct TrainingSession<'a> {
    pub session: &'a SessionFeatures,
    pub windows: &'a [ObservationWindow],
    pub cached: Option<&'a [FeatureVector]>,
}

/// Feature corrections fitted on a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizers {
    pub config: RunConfig,
    pub wind_k: Option<f64>,
    pub baselines: Option<BaselineStore>,
    pub delta_table: Option<DeltaBaselineTable>,
}

/// Normalizers plus the two-stage model trained on their output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedPipeline {
    pub version: String,
    pub normalizers: Normalizers,
    pub model: TwoStageModel,
    pub train_windows: usize,
    pub warnings: Vec<String>,
}

/// Windows a session contributes under `cfg`.
pub fn session_windows(session: &SessionFeatures, cfg: &RunConfig) -> Vec<ObservationWindow> {
    window_phases(&session.manifest, &session.timestamps, &cfg.phases, cfg.window_s, cfg.stride_s)
}

/// Assemble vectors for `windows`, counting dropped ones.
pub fn assemble_all(
    session: &SessionFeatures,
    windows: &[ObservationWindow],
    schema: &FeatureSchema,
    opts: &WindowOptions<'_>,
) -> (Vec<FeatureVector>, usize) {
    let mut out = Vec::with_capacity(windows.len());
    let mut dropped = 0;
    for w in windows {
        match assemble_window_features(w, session, schema, opts) {
            Ok(v) => out.push(v),
            Err(_) => dropped += 1,
        }
    }
    (out, dropped)
}

fn base_schema(cfg: &RunConfig) -> FeatureSchema {
    FeatureSchema::new(cfg.grid_n, &cfg.lags)
}

impl FittedPipeline {
    /// Fit normalizers and the model on `train`. `calibration` holds idle
    /// sessions of devices with no idle training data; they only feed the
    /// headset baseline.
    pub fn fit(
        train: &[TrainingSession<'_>],
        calibration: &[&SessionFeatures],
        cfg: &RunConfig,
        seed: u64,
    ) -> Result<FittedPipeline, EvalError> {
        cfg.validate()?;
        let norm = cfg.normalization;
        let mut warnings = Vec::new();
        let wind_k = norm.wind.then(|| {
            let obs: Vec<_> = train
                .iter()
                .flat_map(|t| {
                    t.windows
                        .iter()
                        .flat_map(|w| wind_observations(w, t.session, &cfg.lags, norm.ambient))
                })
                .collect();
            let fit = fit_wind_coefficient(&obs);
            warnings.extend(fit.warning);
            fit.model.k
        });
        let baselines = norm.headset_baseline.then(|| {
            let refs: Vec<&SessionFeatures> = train.iter().map(|t| t.session).collect();
            let mut store = BaselineStore::build(&refs, norm.ambient);
            let extra = BaselineStore::build(calibration, norm.ambient);
            for (dev, b) in extra.baselines {
                if !store.baselines.contains_key(&dev) {
                    warnings.push(format!("{dev} baseline taken from its own idle sessions"));
                    store.insert(b);
                }
            }
            store
        });
        let mut norms = Normalizers {
            config: cfg.clone(),
            wind_k,
            baselines,
            delta_table: None,
        };

        let base = base_schema(cfg);
        let vectors: Vec<Vec<FeatureVector>> = train
            .iter()
            .map(|t| match t.cached {
                Some(c) if !norm.wind && !norm.headset_baseline => c.to_vec(),
                _ => norms.base_vectors(t.session, t.windows).0,
            })
            .collect();
        if norm.delta_residual {
            let n2 = cfg.grid_n * cfg.grid_n;
            let mut builder = DeltaTableBuilder::new(cfg.grid_n);
            for (t, vs) in train.iter().zip(&vectors) {
                if t.session.manifest.environment != Environment::Indoor {
                    continue;
                }
                for v in vs {
                    for (lp, &lag) in cfg.lags.iter().enumerate() {
                        let cells: Vec<f64> = (0..n2).map(|k| v.values[base.delta_index(lp, k)]).collect();
                        builder.add(&v.label, lag, &cells);
                    }
                }
            }
            norms.delta_table = Some(builder.build());
        }

        let schema = norms.schema();
        let rows = vectors.iter().map(Vec::len).sum::<usize>();
        if rows == 0 {
            return Err(EvalError::Data("no training windows".into()));
        }
        let mut data = Vec::with_capacity(rows * schema.len());
        let mut labels = Vec::with_capacity(rows);
        for v in vectors.iter().flatten() {
            data.extend(norms.finish(v).values);
            labels.push(v.label.clone());
        }
        drop(vectors);
        let x = Matrix::new(rows, schema.len(), data);
        let model = TwoStageModel::fit(&x, &labels, schema.names(), &cfg.train_params(), seed)
            .map_err(|e| EvalError::Data(e.to_string()))?;
        Ok(FittedPipeline {
            version: PIPELINE_VERSION.to_string(),
            normalizers: norms,
            model,
            train_windows: rows,
            warnings,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.normalizers.config
    }

    /// Full-schema vectors for a session's windows; see [`Normalizers::session_vectors`].
    pub fn session_vectors(
        &self,
        session: &SessionFeatures,
        windows: &[ObservationWindow],
        cached: Option<&[FeatureVector]>,
    ) -> Result<Vec<FeatureVector>, EvalError> {
        self.normalizers.session_vectors(session, windows, cached)
    }

    /// Two-stage inference over already assembled full-schema vectors.
    pub fn infer_vectors(&self, session_id: &str, vectors: &[FeatureVector]) -> Result<SessionPrediction, ClassifyError> {
        let rows: Vec<(usize, Vec<f64>)> = vectors.iter().map(|v| (v.window_start, v.values.clone())).collect();
        two_stage_infer(session_id, &rows, &self.model)
    }

    pub fn save(&self, path: &Path) -> Result<(), EvalError> {
        let text = serde_json::to_string(self).map_err(|e| EvalError::Data(e.to_string()))?;
        fs::write(path, text).map_err(|e| EvalError::Io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<FittedPipeline, EvalError> {
        let text = fs::read_to_string(path).map_err(|e| EvalError::Io(path.display().to_string(), e))?;
        let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| EvalError::Data(e.to_string()))?;
        let found = v.get("version").and_then(|x| x.as_str()).unwrap_or("");
        if found != PIPELINE_VERSION {
            return Err(EvalError::Data(format!(
                "{}: pipeline version {found:?}, expected {PIPELINE_VERSION}",
                path.display()
            )));
        }
        let model_text = v.get("model").map(|m| m.to_string()).unwrap_or_default();
        TwoStageModel::from_json(&model_text).map_err(|e| EvalError::Data(e.to_string()))?;
        serde_json::from_value(v).map_err(|e| EvalError::Data(e.to_string()))
    }
}

impl Normalizers {
    /// Feature schema including residual slots for every app in the delta table.
    pub fn schema(&self) -> FeatureSchema {
        let mut s = base_schema(&self.config);
        if let Some(t) = &self.delta_table {
            s.residual_apps = t.apps().map(str::to_string).collect();
        }
        s
    }

    fn baseline_for(&self, device: &str) -> Option<&HeadsetBaseline> {
        self.baselines.as_ref().and_then(|b| b.baselines.get(device))
    }

    /// Vectors in the base schema with ambient, wind and baseline corrections applied.
    pub fn base_vectors(&self, session: &SessionFeatures, windows: &[ObservationWindow]) -> (Vec<FeatureVector>, usize) {
        let opts = WindowOptions {
            ambient: self.config.normalization.ambient,
            wind_k: self.wind_k,
            baseline: self.baseline_for(&session.manifest.device_model),
        };
        assemble_all(session, windows, &base_schema(&self.config), &opts)
    }

    /// Widen a base-schema vector into the full schema and fill its residuals.
    pub fn finish(&self, v: &FeatureVector) -> FeatureVector {
        let schema = self.schema();
        let base = base_schema(&self.config);
        let mut out = if schema.len() == base.len() {
            v.clone()
        } else {
            let b = base.base_len();
            let mut values = Vec::with_capacity(schema.len());
            values.extend_from_slice(&v.values[..b]);
            values.resize(schema.len() - CONTEXT_FEATURES.len(), f64::NAN);
            values.extend_from_slice(&v.values[b..]);
            FeatureVector {
                values,
                ..v.clone()
            }
        };
        if let Some(t) = &self.delta_table {
            fill_residuals(&mut out, &schema, t);
        }
        out
    }

    /// Full-schema vectors for a session's windows. `cached` base vectors are
    /// reused when no fold-dependent correction is configured.
    pub fn session_vectors(
        &self,
        session: &SessionFeatures,
        windows: &[ObservationWindow],
        cached: Option<&[FeatureVector]>,
    ) -> Result<Vec<FeatureVector>, EvalError> {
        let norm = self.config.normalization;
        if norm.headset_baseline && self.baseline_for(&session.manifest.device_model).is_none() {
            return Err(EvalError::Data(format!(
                "no idle baseline for device {}; train with its home sessions",
                session.manifest.device_model
            )));
        }
        let base = match cached {
            Some(c) if !norm.wind && !norm.headset_baseline => c.to_vec(),
            _ => self.base_vectors(session, windows).0,
        };
        Ok(base.iter().map(|v| self.finish(v)).collect())
    }
}
