//! Spatiotemporal thermal signature: per-cell statistics over an N x N grid of
//! the headset bounding box, cardinal-neighbour gradients, temporal deltas,
//! and window-level feature vectors.
//!
//! Missing values are NaN throughout; imputation happens at classification
//! time with training-split medians.

mod frame;
mod grid;
mod window;

use thiserror::Error;

pub use frame::{
    frame_features, FrameFeatures, SessionFeatures, CHANNELS, CH_GRAD, CH_MAX, CH_MEAN, CH_MIN,
    CH_STD,
};
pub use grid::{cell_stats, spatial_gradient, temporal_delta, CellStats, GridSpec, GRID_SWEEP};
pub use window::{
    assemble_window_features, fill_residuals, wind_observations, write_feature_csv,
    FeatureSchema, FeatureVector, WindowDropped, WindowOptions, AGGREGATIONS, CONTEXT_FEATURES,
    DEFAULT_LAGS,
};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("invalid grid: {0}")]
    Grid(String),
}
