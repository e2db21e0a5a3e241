use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::FrameError;

/// Header of `sensors.csv`.
pub const SENSOR_HEADER: [&str; 5] = [
    "timestamp_ms",
    "ambient_c",
    "humidity_pct",
    "air_velocity_mps",
    "distance_cm",
];

/// One environmental reading: ambient temperature, humidity, airflow and camera distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorSample {
    pub timestamp_ms: i64,
    pub ambient_c: f64,
    pub humidity_pct: f64,
    pub air_velocity_mps: f64,
    pub distance_cm: f64,
}

impl SensorSample {
    pub fn validate(&self) -> Result<(), String> {
        let finite = [
            self.ambient_c,
            self.humidity_pct,
            self.air_velocity_mps,
            self.distance_cm,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err("non-finite reading".into());
        }
        if !(0.0..=100.0).contains(&self.humidity_pct) {
            return Err(format!("humidity {} outside 0..100", self.humidity_pct));
        }
        if self.air_velocity_mps < 0.0 {
            return Err(format!("negative air velocity {}", self.air_velocity_mps));
        }
        if self.distance_cm <= 0.0 {
            return Err(format!("non-positive distance {}", self.distance_cm));
        }
        Ok(())
    }
}

/// Validate ranges and strict timestamp monotonicity of a sensor log.
pub fn check_sensor_log(samples: &[SensorSample]) -> Result<(), FrameError> {
    for (i, s) in samples.iter().enumerate() {
        s.validate()
            .map_err(|message| FrameError::Sensor { line: i, message })?;
        if i > 0 && samples[i - 1].timestamp_ms >= s.timestamp_ms {
            return Err(FrameError::Sensor {
                line: i,
                message: "timestamps not strictly increasing".into(),
            });
        }
    }
    Ok(())
}

pub fn parse_sensor_log(text: &str) -> Result<Vec<SensorSample>, FrameError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| FrameError::Sensor {
        line: 0,
        message: e.to_string(),
    })?;
    if headers.iter().ne(SENSOR_HEADER) {
        return Err(FrameError::Sensor {
            line: 0,
            message: format!("unexpected header {:?}", headers.iter().collect::<Vec<_>>()),
        });
    }
    let mut samples = Vec::new();
    for (i, row) in reader.deserialize::<SensorSample>().enumerate() {
        let sample = row.map_err(|e| FrameError::Sensor {
            line: i + 1,
            message: e.to_string(),
        })?;
        samples.push(sample);
    }
    check_sensor_log(&samples)?;
    Ok(samples)
}

pub fn load_sensor_log(path: &Path) -> Result<Vec<SensorSample>, FrameError> {
    let text = fs::read_to_string(path).map_err(|e| FrameError::io(path, e))?;
    parse_sensor_log(&text)
}

pub fn write_sensor_log(path: &Path, samples: &[SensorSample]) -> Result<(), FrameError> {
    let mut out = Vec::with_capacity(samples.len() * 48);
    writeln!(out, "{}", SENSOR_HEADER.join(",")).expect("in-memory write");
    for s in samples {
        writeln!(
            out,
            "{},{:.4},{:.3},{:.4},{:.2}",
            s.timestamp_ms, s.ambient_c, s.humidity_pct, s.air_velocity_mps, s.distance_cm
        )
        .expect("in-memory write");
    }
    fs::write(path, out).map_err(|e| FrameError::io(path, e))
}
