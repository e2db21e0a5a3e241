//! On-disk recording format: radiometric frame CSVs, sensor logs and session
//! manifests, plus time alignment and windowing.
//!
//! A dataset is a directory of sessions:
//!
//! ```text
//! <dataset>/<session_id>/manifest.json
//!                       /frames/frame_<epochms>.csv
//!                       /sensors.csv
//!                       /masks/mask_<epochms>.csv      (optional)
//! ```

mod dataset;
mod frame;
mod manifest;
mod sensor;
mod session;

use std::path::Path;

use thiserror::Error;

pub use dataset::{list_sessions, load_session, write_session, SessionDir};
pub use frame::{
    load_frame, parse_frame_csv, timestamp_from_name, RadiometricFrame, CSV_DECIMALS,
    MAX_PLAUSIBLE_C, MIN_FRAME_SIDE, MIN_PLAUSIBLE_C,
};
pub use manifest::{Environment, Phase, PhaseMarks, SessionManifest, IDLE_LABEL};
pub use sensor::{
    check_sensor_log, load_sensor_log, parse_sensor_log, write_sensor_log, SensorSample,
    SENSOR_HEADER,
};
pub use session::{
    align_session, nearest_sample, window_phases, window_range, window_session,
    ObservationWindow, SessionRecording, DEFAULT_TOLERANCE_MS,
};

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("row {row}: expected {expected} columns, found {found}")]
    Ragged {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("non-finite temperature at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("frame {height}x{width} is smaller than the 16x16 minimum")]
    TooSmall { height: usize, width: usize },
    #[error("expected {expected} values, found {found}")]
    Shape { expected: usize, found: usize },
    #[error("cannot derive a timestamp from file name {path}")]
    Name { path: String },
    #[error("sensor log line {line}: {message}")]
    Sensor { line: usize, message: String },
    #[error("manifest {session}: {message}")]
    Manifest { session: String, message: String },
    #[error("session {session} has no frames or no sensor samples")]
    EmptySession { session: String },
    #[error("session {session}: frame {index} is not after its predecessor")]
    Order { session: String, index: usize },
    #[error("mask {path}: {message}")]
    Mask { path: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl FrameError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        FrameError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
