//! Thermal side-channel fingerprinting of VR headsets.
//!
//! Radiometric frame sequences and environmental sensor logs go in; per-window
//! and per-session application labels come out. The pipeline stages map onto
//! modules:
//!
//! * [`frame_store`] parses, aligns and windows recordings.
//! * [`roi`] provides headset masks and their geometric validity filters.
//! * [`features`] turns masked frames into grid statistics, gradients and deltas.
//! * [`normalize`] applies ambient, wind and idle-baseline corrections.
//! * [`classify`] holds preprocessing, the forest and margin classifiers, and two-stage inference.
//! * [`eval`] plans folds, scores predictions and runs experiments.
//! * [`synth`] simulates headset heating to produce labelled datasets.

pub mod classify;
pub mod config;
pub mod eval;
pub mod features;
pub mod frame_store;
pub mod normalize;
pub mod roi;
pub mod synth;
pub(crate) mod util;

pub use util::{mix_seed, stable_hash};
