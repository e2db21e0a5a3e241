//! Synthetic recordings from 2D heat diffusion over a headset-shaped chassis.
//!
//! Sources are expressed in °C/s, so no material constants are needed. Each
//! chassis pixel follows
//!
//! ```text
//! dT/dt = alpha * lap(T) + S(t) - (h + c_v * v(t) + fan(t)) * (T - T_amb)
//! ```
//!
//! with an insulated chassis boundary; background pixels sit at ambient.
//! Output frames add the device offset field, distance attenuation and
//! Gaussian sensor noise.

mod profile;
mod sim;
mod suite;

use thiserror::Error;

use crate::frame_store::FrameError;

pub use profile::{
    AppWorkloadProfile, ChassisShape, DeviceProfile, FanCurve, Modulation, OffsetField,
    SourceSlot, DEFAULT_APPS, REFERENCE_WIDTH,
};
pub use sim::{
    EnvTrajectory, PhaseDurations, SimConfig, SimFrame, Simulator, SolarPatch, CFL_LIMIT,
    DEFAULT_NOISE_STD, REFERENCE_DISTANCE_CM,
};
pub use suite::{
    generate_dataset, simulate_features, simulate_session, SessionPlan, SuiteGroup, SuiteSpec,
};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
}
