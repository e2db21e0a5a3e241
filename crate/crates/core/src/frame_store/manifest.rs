use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::FrameError;

/// Reserved label of the idle (home screen) state.
pub const IDLE_LABEL: &str = "home";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Environment {
    Indoor,
    Outdoor,
}

impl fmt::Display for Environment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Environment::Indoor => "indoor",
            Environment::Outdoor => "outdoor",
        })
    }
}

/// Recording protocol phases, in order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Baseline,
    HeatUp,
    Steady,
    CoolDown,
}

impl Phase {
    pub const ALL: [Phase; 4] = [Phase::Baseline, Phase::HeatUp, Phase::Steady, Phase::CoolDown];

    pub fn name(self) -> &'static str {
        match self {
            Phase::Baseline => "baseline",
            Phase::HeatUp => "heat_up",
            Phase::Steady => "steady",
            Phase::CoolDown => "cool_down",
        }
    }

    pub fn parse(s: &str) -> Option<Phase> {
        Phase::ALL.into_iter().find(|p| p.name() == s)
    }
}

/// Start timestamps (epoch ms) of the four protocol phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseMarks {
    pub baseline: i64,
    pub heat_up: i64,
    pub steady: i64,
    pub cool_down: i64,
}

impl PhaseMarks {
    pub fn start(&self, phase: Phase) -> i64 {
        match phase {
            Phase::Baseline => self.baseline,
            Phase::HeatUp => self.heat_up,
            Phase::Steady => self.steady,
            Phase::CoolDown => self.cool_down,
        }
    }

    /// Phase active at `t`; times before the baseline mark count as baseline.
    pub fn phase_at(&self, t: i64) -> Phase {
        if t >= self.cool_down {
            Phase::CoolDown
        } else if t >= self.steady {
            Phase::Steady
        } else if t >= self.heat_up {
            Phase::HeatUp
        } else {
            Phase::Baseline
        }
    }

    fn strictly_increasing(&self) -> bool {
        self.baseline < self.heat_up && self.heat_up < self.steady && self.steady < self.cool_down
    }
}

fn default_rate() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionManifest {
    pub session_id: String,
    pub device_model: String,
    pub app_label: String,
    pub environment: Environment,
    pub phase_marks: PhaseMarks,
    #[serde(default = "default_rate")]
    pub sample_rate_hz: f64,
}

impl SessionManifest {
    pub fn validate(&self) -> Result<(), FrameError> {
        let bad = |message: &str| FrameError::Manifest {
            session: self.session_id.clone(),
            message: message.to_string(),
        };
        if self.session_id.is_empty() {
            return Err(bad("empty session_id"));
        }
        if self.app_label.is_empty() {
            return Err(bad("empty app_label"));
        }
        if !self.phase_marks.strictly_increasing() {
            return Err(bad("phase marks not strictly increasing"));
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(bad("sample_rate_hz must be positive"));
        }
        Ok(())
    }

    pub fn is_idle(&self) -> bool {
        self.app_label == IDLE_LABEL
    }

    pub fn load(path: &Path) -> Result<Self, FrameError> {
        let text = fs::read_to_string(path).map_err(|e| FrameError::io(path, e))?;
        let manifest: SessionManifest =
            serde_json::from_str(&text).map_err(|e| FrameError::Manifest {
                session: path.display().to_string(),
                message: e.to_string(),
            })?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn save(&self, path: &Path) -> Result<(), FrameError> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, text + "\n").map_err(|e| FrameError::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest() -> SessionManifest {
        SessionManifest {
            session_id: "s01".into(),
            device_model: "quest3".into(),
            app_label: "youtube".into(),
            environment: Environment::Indoor,
            phase_marks: PhaseMarks {
                baseline: 0,
                heat_up: 60_000,
                steady: 180_000,
                cool_down: 540_000,
            },
            sample_rate_hz: 1.0,
        }
    }

    #[test]
    fn json_defaults_sample_rate() {
        let json = r#"{"session_id":"a","device_model":"quest2","app_label":"home",
            "environment":"outdoor",
            "phase_marks":{"baseline":0,"heat_up":1,"steady":2,"cool_down":3}}"#;
        let m: SessionManifest = serde_json::from_str(json).unwrap();
        assert_eq!(m.sample_rate_hz, 1.0);
        assert!(m.is_idle());
        assert_eq!(m.environment, Environment::Outdoor);
        m.validate().unwrap();
    }

    #[test]
    fn phase_lookup() {
        let m = manifest();
        assert_eq!(m.phase_marks.phase_at(-5), Phase::Baseline);
        assert_eq!(m.phase_marks.phase_at(60_000), Phase::HeatUp);
        assert_eq!(m.phase_marks.phase_at(200_000), Phase::Steady);
        assert_eq!(m.phase_marks.phase_at(600_000), Phase::CoolDown);
    }

    #[test]
    fn rejects_unordered_marks_and_empty_label() {
        let mut m = manifest();
        m.phase_marks.steady = m.phase_marks.heat_up;
        assert!(m.validate().is_err());
        let mut m = manifest();
        m.app_label.clear();
        assert!(m.validate().is_err());
    }
}
