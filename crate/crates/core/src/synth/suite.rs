use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    AppWorkloadProfile, DeviceProfile, EnvTrajectory, PhaseDurations, SimConfig, Simulator,
    SynthError, DEFAULT_APPS, DEFAULT_NOISE_STD,
};
use crate::features::{frame_features, GridSpec, SessionFeatures};
use crate::frame_store::{write_sensor_log, Environment, SessionDir};
use crate::util::{mix_seed, stable_hash};

fn default_height() -> usize {
    192
}
fn default_width() -> usize {
    256
}
fn default_noise() -> f64 {
    DEFAULT_NOISE_STD
}
fn default_warmup() -> u32 {
    300
}

/// `sessions` recordings of every listed app on one device in one environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteGroup {
    pub device: String,
    pub environment: Environment,
    pub apps: Vec<String>,
    pub sessions: usize,
}

/// JSON description of a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSpec {
    pub name: String,
    #[serde(default = "default_height")]
    pub height: usize,
    #[serde(default = "default_width")]
    pub width: usize,
    #[serde(default)]
    pub phases: PhaseDurations,
    #[serde(default = "default_noise")]
    pub noise_std: f64,
    #[serde(default = "default_warmup")]
    pub warmup_s: u32,
    pub groups: Vec<SuiteGroup>,
    /// Profiles that extend or shadow the built-in devices.
    #[serde(default)]
    pub custom_devices: Vec<DeviceProfile>,
    /// Profiles that extend or shadow the built-in apps.
    #[serde(default)]
    pub custom_apps: Vec<AppWorkloadProfile>,
}

fn labels(apps: &[&str]) -> Vec<String> {
    apps.iter().map(|a| a.to_string()).collect()
}

impl SuiteSpec {
    fn with_groups(name: &str, groups: Vec<SuiteGroup>) -> Self {
        Self {
            name: name.into(),
            height: default_height(),
            width: default_width(),
            phases: PhaseDurations::default(),
            noise_std: DEFAULT_NOISE_STD,
            warmup_s: default_warmup(),
            groups,
            custom_devices: Vec::new(),
            custom_apps: Vec::new(),
        }
    }

    /// One headset, home plus six apps, eight indoor sessions each.
    pub fn default_suite() -> Self {
        Self::with_groups(
            "default",
            vec![SuiteGroup {
                device: "quest3".into(),
                environment: Environment::Indoor,
                apps: labels(&DEFAULT_APPS),
                sessions: 8,
            }],
        )
    }

    /// Three headsets, every label, `sessions` indoor sessions each.
    pub fn cross_device(sessions: usize) -> Self {
        let groups = ["quest3", "quest2", "vive_focus"]
            .iter()
            .map(|d| SuiteGroup {
                device: d.to_string(),
                environment: Environment::Indoor,
                apps: labels(&DEFAULT_APPS),
                sessions,
            })
            .collect();
        Self::with_groups("cross_device", groups)
    }

    /// One headset recorded indoors and outdoors.
    pub fn indoor_outdoor(indoor: usize, outdoor: usize) -> Self {
        let group = |environment, sessions| SuiteGroup {
            device: "quest3".into(),
            environment,
            apps: labels(&DEFAULT_APPS),
            sessions,
        };
        Self::with_groups(
            "indoor_outdoor",
            vec![group(Environment::Indoor, indoor), group(Environment::Outdoor, outdoor)],
        )
    }

    pub fn load(path: &Path) -> Result<Self, SynthError> {
        let text = fs::read_to_string(path).map_err(|e| SynthError::Io(path.display().to_string(), e))?;
        let spec: Self = serde_json::from_str(&text).map_err(|e| SynthError::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn save(&self, path: &Path) -> Result<(), SynthError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| SynthError::Config(e.to_string()))?;
        fs::write(path, text).map_err(|e| SynthError::Io(path.display().to_string(), e))
    }

    pub fn device(&self, model: &str) -> Result<DeviceProfile, SynthError> {
        self.custom_devices
            .iter()
            .find(|d| d.model == model)
            .cloned()
            .or_else(|| DeviceProfile::builtin(model))
            .ok_or_else(|| SynthError::Config(format!("unknown device {model}")))
    }

    pub fn app(&self, label: &str) -> Result<AppWorkloadProfile, SynthError> {
        self.custom_apps
            .iter()
            .find(|a| a.app_label == label)
            .cloned()
            .or_else(|| AppWorkloadProfile::builtin(label))
            .ok_or_else(|| SynthError::Config(format!("unknown app {label}")))
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.groups.is_empty() {
            return Err(SynthError::Config("suite has no groups".into()));
        }
        for g in &self.groups {
            let d = self.device(&g.device)?;
            d.validate()?;
            for a in &g.apps {
                self.app(a)?.validate(&d)?;
            }
        }
        Ok(())
    }

    /// Every session of the suite in a fixed order.
    pub fn sessions(&self, seed: u64) -> Vec<SessionPlan> {
        let mut out = Vec::new();
        for g in &self.groups {
            for app in &g.apps {
                for k in 0..g.sessions {
                    let id = format!("{}_{}_{}_{:02}", g.device, g.environment, app, k);
                    let session_seed = mix_seed(seed, stable_hash(&id));
                    out.push(SessionPlan {
                        index: out.len(),
                        session_id: id,
                        device: g.device.clone(),
                        app: app.clone(),
                        environment: g.environment,
                        seed: session_seed,
                    });
                }
            }
        }
        out
    }

    pub fn session_count(&self) -> usize {
        self.groups.iter().map(|g| g.apps.len() * g.sessions).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionPlan {
    pub index: usize,
    pub session_id: String,
    pub device: String,
    pub app: String,
    pub environment: Environment,
    pub seed: u64,
}

impl SessionPlan {
    /// Simulation settings: environment trajectory, placement and timing are
    /// drawn from the session's own seed.
    pub fn config(&self, spec: &SuiteSpec) -> SimConfig {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(self.seed, 3));
        let secs = (spec.phases.total() + 1) as usize;
        let env = match self.environment {
            Environment::Indoor => EnvTrajectory::indoor(&mut rng, secs),
            Environment::Outdoor => EnvTrajectory::outdoor(&mut rng, secs),
        };
        let jiggle = 0.02 * spec.width as f64;
        let placement = (rng.random_range(-jiggle..=jiggle), rng.random_range(-jiggle..=jiggle));
        SimConfig {
            height: spec.height,
            width: spec.width,
            phases: spec.phases,
            warmup_s: spec.warmup_s,
            noise_std: spec.noise_std,
            start_ms: 1_700_000_000_000 + self.index as i64 * 3_600_000,
            substeps: None,
            env,
            placement,
            jitter: true,
            seed: self.seed,
        }
    }

    pub fn simulator(&self, spec: &SuiteSpec) -> Result<Simulator, SynthError> {
        Simulator::new(
            &self.session_id,
            &spec.device(&self.device)?,
            &spec.app(&self.app)?,
            self.environment,
            self.config(spec),
        )
    }
}

/// Simulate a session straight into per-frame grid features, one
/// `SessionFeatures` per requested grid. Frames never touch the disk.
pub fn simulate_features(
    plan: &SessionPlan,
    spec: &SuiteSpec,
    grids: &[GridSpec],
) -> Result<Vec<SessionFeatures>, SynthError> {
    let sim = plan.simulator(spec)?;
    let mask = sim.mask().clone();
    let mut out: Vec<SessionFeatures> = grids
        .iter()
        .map(|g| SessionFeatures::new(sim.manifest().clone(), g.n))
        .collect();
    for f in sim {
        for (sf, g) in out.iter_mut().zip(grids) {
            sf.push(f.frame.timestamp_ms(), frame_features(&f.frame, &mask, g), Some(f.sensor));
        }
    }
    Ok(out)
}

/// Simulate one session into `dir` using the on-disk recording layout, with
/// the chassis as the ingested mask of every frame.
pub fn simulate_session(plan: &SessionPlan, spec: &SuiteSpec, dir: &SessionDir) -> Result<(), SynthError> {
    let sim = plan.simulator(spec)?;
    fs::create_dir_all(dir.frames()).map_err(|e| SynthError::Io(dir.frames().display().to_string(), e))?;
    fs::create_dir_all(dir.masks()).map_err(|e| SynthError::Io(dir.masks().display().to_string(), e))?;
    sim.manifest().save(&dir.manifest())?;
    let mask_text = sim.mask().to_csv_string();
    let mut sensors = Vec::with_capacity(sim.frames_total() as usize);
    for f in sim {
        let ts = f.frame.timestamp_ms();
        f.frame.write_csv(&dir.frame_path(ts))?;
        let p = dir.mask_path(ts);
        fs::write(&p, &mask_text).map_err(|e| SynthError::Io(p.display().to_string(), e))?;
        sensors.push(f.sensor);
    }
    write_sensor_log(&dir.sensors(), &sensors)?;
    Ok(())
}

/// Write every session of the suite under `out`, plus a copy of the spec.
pub fn generate_dataset(spec: &SuiteSpec, seed: u64, out: &Path) -> Result<Vec<SessionDir>, SynthError> {
    spec.validate()?;
    fs::create_dir_all(out).map_err(|e| SynthError::Io(out.display().to_string(), e))?;
    spec.save(&out.join("suite.json"))?;
    let plans = spec.sessions(seed);
    let run = |p: &SessionPlan| {
        let dir = SessionDir::new(out.join(&p.session_id));
        simulate_session(p, spec, &dir).map(|_| dir)
    };
    #[cfg(feature = "parallel")]
    let dirs: Vec<Result<SessionDir, SynthError>> = {
        use rayon::prelude::*;
        plans.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let dirs: Vec<Result<SessionDir, SynthError>> = plans.iter().map(run).collect();
    dirs.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_suite_shape() {
        let s = SuiteSpec::default_suite();
        assert_eq!(s.session_count(), 56);
        let plans = s.sessions(7);
        assert_eq!(plans.len(), 56);
        assert_eq!(plans[0].session_id, "quest3_indoor_home_00");
        assert_eq!(s.phases.total(), 600);
        let ids: std::collections::BTreeSet<_> = plans.iter().map(|p| &p.session_id).collect();
        assert_eq!(ids.len(), 56);
    }

    #[test]
    fn spec_json_round_trip() {
        let s = SuiteSpec::cross_device(4);
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<SuiteSpec>(&text).unwrap(), s);
        let minimal = r#"{"name":"x","groups":[{"device":"quest2","environment":"outdoor","apps":["home"],"sessions":1}]}"#;
        let m: SuiteSpec = serde_json::from_str(minimal).unwrap();
        assert_eq!((m.height, m.width, m.phases.total()), (192, 256, 600));
        m.validate().unwrap();
    }

    #[test]
    fn unknown_names_fail_validation() {
        let mut s = SuiteSpec::default_suite();
        s.groups[0].apps.push("tetris".into());
        assert!(s.validate().is_err());
        s.groups[0].device = "visionpro".into();
        assert!(s.validate().is_err());
    }
}
