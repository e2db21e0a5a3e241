//! Environmental and device corrections: ambient subtraction, wind
//! compensation of temperature changes, indoor delta-profile residuals,
//! idle-baseline subtraction, and the cross-device signature ratio.
//!
//! Corrections are applied in a fixed order: ambient, then wind, then the
//! optional headset baseline.

mod baseline;
mod delta;
mod ratio;
mod wind;

use thiserror::Error;

pub use baseline::{apply_headset_baseline, BaselineResidual, BaselineStore, HeadsetBaseline};
pub use delta::{delta_residual, DeltaBaselineTable, DeltaTableBuilder, LagProfile, PROFILE_LAGS};
pub use ratio::{cosine, signature_ratio, SignatureRatio};
pub use wind::{
    ambient_correct, fit_wind_coefficient, wind_correct, WindFit, WindModel, WindObservation,
    MAX_WIND_K, MIN_VELOCITY_SPREAD,
};

#[derive(Debug, Error)]
pub enum NormalizeError {
    #[error("no idle baseline for device {0}")]
    BaselineMissing(String),
    #[error("signature ratio: {0}")]
    Ratio(String),
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error("malformed table: {0}")]
    Format(String),
}
