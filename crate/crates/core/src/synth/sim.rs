use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{AppWorkloadProfile, DeviceProfile, SynthError, REFERENCE_WIDTH};
use crate::frame_store::{Environment, Phase, PhaseMarks, RadiometricFrame, SensorSample, SessionManifest};
use crate::roi::Mask;
use crate::util::mix_seed;

/// Default per-pixel sensor noise (°C), the 40 mK NETD.
pub const DEFAULT_NOISE_STD: f64 = 0.04;
/// Camera distance at which no attenuation applies.
pub const REFERENCE_DISTANCE_CM: f64 = 50.0;
/// Explicit-scheme stability bound: `dt_sub * alpha <= CFL_LIMIT`.
pub const CFL_LIMIT: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseDurations {
    pub baseline_s: u32,
    pub heat_up_s: u32,
    pub steady_s: u32,
    pub cool_down_s: u32,
}

impl Default for PhaseDurations {
    fn default() -> Self {
        Self {
            baseline_s: 60,
            heat_up_s: 120,
            steady_s: 360,
            cool_down_s: 60,
        }
    }
}

impl PhaseDurations {
    pub fn total(&self) -> u32 {
        self.baseline_s + self.heat_up_s + self.steady_s + self.cool_down_s
    }

    pub fn phase_at(&self, t: u32) -> Phase {
        if t < self.baseline_s {
            Phase::Baseline
        } else if t < self.baseline_s + self.heat_up_s {
            Phase::HeatUp
        } else if t < self.baseline_s + self.heat_up_s + self.steady_s {
            Phase::Steady
        } else {
            Phase::CoolDown
        }
    }

    pub fn marks(&self, start_ms: i64) -> PhaseMarks {
        let at = |s: u32| start_ms + s as i64 * 1000;
        PhaseMarks {
            baseline: start_ms,
            heat_up: at(self.baseline_s),
            steady: at(self.baseline_s + self.heat_up_s),
            cool_down: at(self.baseline_s + self.heat_up_s + self.steady_s),
        }
    }
}

/// Sun-lit patch on one side of the chassis that drifts horizontally.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolarPatch {
    pub u_start: f64,
    pub u_end: f64,
    pub v: f64,
    pub sigma: f64,
    /// Peak heating (°C/s).
    pub intensity: f64,
}

/// Per-second environment. Values past the end repeat the last sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvTrajectory {
    pub ambient_c: Vec<f64>,
    pub air_velocity_mps: Vec<f64>,
    pub humidity_pct: f64,
    pub distance_cm: f64,
    pub solar: Option<SolarPatch>,
}

fn sample_at(v: &[f64], t: usize) -> f64 {
    v[t.min(v.len() - 1)]
}

impl EnvTrajectory {
    pub fn constant(ambient_c: f64, air_velocity_mps: f64) -> Self {
        Self {
            ambient_c: vec![ambient_c],
            air_velocity_mps: vec![air_velocity_mps],
            humidity_pct: 45.0,
            distance_cm: REFERENCE_DISTANCE_CM,
            solar: None,
        }
    }

    pub fn ambient(&self, t: usize) -> f64 {
        sample_at(&self.ambient_c, t)
    }

    pub fn wind(&self, t: usize) -> f64 {
        sample_at(&self.air_velocity_mps, t)
    }

    /// Lab conditions: ambient 19.8 to 20.9 °C with a slight drift, near-still air.
    pub fn indoor(rng: &mut impl Rng, seconds: usize) -> Self {
        let base = rng.random_range(19.8..20.9);
        let drift = rng.random_range(0.0..0.15);
        let period = rng.random_range(900.0..2400.0);
        let phase = rng.random_range(0.0..TAU);
        let draft = rng.random_range(0.0..0.1);
        let ambient_c = (0..seconds)
            .map(|t| (base + drift * (TAU * t as f64 / period + phase).sin()).clamp(19.8, 20.9))
            .collect();
        Self {
            ambient_c,
            air_velocity_mps: vec![draft],
            humidity_pct: rng.random_range(35.0..50.0),
            distance_cm: rng.random_range(46.0..54.0),
            solar: None,
        }
    }

    /// Outdoor conditions: widely varying base ambient with up to ±4 °C drift,
    /// gusty wind averaging about 1.5 m/s, and a drifting solar patch.
    pub fn outdoor(rng: &mut impl Rng, seconds: usize) -> Self {
        let base = rng.random_range(8.0..30.0);
        let drift = rng.random_range(1.0..4.0);
        let period = rng.random_range(600.0..1800.0);
        let phase = rng.random_range(0.0..TAU);
        let ambient_c = (0..seconds)
            .map(|t| base + drift * (TAU * t as f64 / period + phase).sin())
            .collect();
        let mean_wind: f64 = rng.random_range(1.0..2.0);
        let gust = Normal::new(0.0, 0.35).expect("valid std");
        let mut w = mean_wind;
        let mut air = Vec::with_capacity(seconds);
        for _ in 0..seconds {
            // Ornstein-Uhlenbeck gusts around the session mean
            w += 0.05 * (mean_wind - w) + gust.sample(rng);
            w = w.clamp(0.0, 6.0);
            air.push(w);
        }
        let left = rng.random_bool(0.5);
        let (u_start, u_end) = if left { (0.05, 0.3) } else { (0.95, 0.7) };
        Self {
            ambient_c,
            air_velocity_mps: air,
            humidity_pct: rng.random_range(30.0..80.0),
            distance_cm: rng.random_range(44.0..56.0),
            solar: Some(SolarPatch {
                u_start,
                u_end,
                v: rng.random_range(0.2..0.6),
                sigma: 0.15,
                intensity: rng.random_range(0.02..0.15),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub height: usize,
    pub width: usize,
    pub phases: PhaseDurations,
    /// Unrecorded idle run before the first frame.
    pub warmup_s: u32,
    pub noise_std: f64,
    pub start_ms: i64,
    /// Internal substeps per 1 s output step; `None` picks the smallest stable count.
    pub substeps: Option<u32>,
    pub env: EnvTrajectory,
    /// Chassis shift from the frame centre, pixels `(dy, dx)`.
    pub placement: (f64, f64),
    /// Apply the app's per-session and per-second jitter.
    pub jitter: bool,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(height: usize, width: usize, seed: u64) -> Self {
        Self {
            height,
            width,
            phases: PhaseDurations::default(),
            warmup_s: 300,
            noise_std: DEFAULT_NOISE_STD,
            start_ms: 1_700_000_000_000,
            substeps: None,
            env: EnvTrajectory::constant(20.0, 0.0),
            placement: (0.0, 0.0),
            jitter: true,
            seed,
        }
    }
}

/// One output second: the radiometric frame and the sensor reading.
#[derive(Debug, Clone)]
pub struct SimFrame {
    pub frame: RadiometricFrame,
    pub sensor: SensorSample,
}

struct ActiveSource {
    weights: Vec<f64>,
    base: f64,
    gain: f64,
    depth: f64,
    period: f64,
    phase: f64,
}

/// Explicit finite-difference heat diffusion over the chassis, streamed one
/// frame per second.
pub struct Simulator {
    config: SimConfig,
    mask: Mask,
    /// Flat indices of chassis pixels.
    pixels: Vec<usize>,
    /// 4-neighbour flat indices; a neighbour outside the chassis is the pixel
    /// itself, which makes the boundary insulated.
    neighbours: Vec<[usize; 4]>,
    /// Chassis-relative `(u, v)` of each chassis pixel.
    offsets: Vec<f64>,
    solar_uv: Vec<(f64, f64)>,
    solar_px_scale: f64,
    idle: Vec<f64>,
    sources: Vec<ActiveSource>,
    alpha: f64,
    h: f64,
    c_v: f64,
    fan: Option<super::FanCurve>,
    fan_on: bool,
    substeps: u32,
    attenuation: f64,
    temps: Vec<f64>,
    scratch: Vec<f64>,
    heat: Vec<f64>,
    param_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
    noise: Option<Normal<f64>>,
    manifest: SessionManifest,
    t: u32,
}

impl Simulator {
    pub fn new(
        session_id: &str,
        device: &DeviceProfile,
        app: &AppWorkloadProfile,
        environment: Environment,
        config: SimConfig,
    ) -> Result<Self, SynthError> {
        device.validate()?;
        app.validate(device)?;
        let (hgt, wid) = (config.height, config.width);
        if hgt < 16 || wid < 16 {
            return Err(SynthError::Config(format!("frame {hgt}x{wid} below 16x16")));
        }
        if config.phases.total() == 0 {
            return Err(SynthError::Config("session has zero duration".into()));
        }
        if config.env.ambient_c.is_empty() || config.env.air_velocity_mps.is_empty() {
            return Err(SynthError::Config("empty environment trajectory".into()));
        }
        if !(config.noise_std >= 0.0) {
            return Err(SynthError::Config("noise std must be >= 0".into()));
        }
        let scale = wid as f64 / REFERENCE_WIDTH as f64;
        let alpha = device.alpha * scale * scale;
        let min_sub = (alpha / CFL_LIMIT).ceil().max(1.0) as u32;
        let substeps = match config.substeps {
            Some(0) => return Err(SynthError::Config("substeps must be >= 1".into())),
            Some(n) if (alpha / n as f64) > CFL_LIMIT + 1e-12 => {
                return Err(SynthError::Config(format!(
                    "CFL violation: dt_sub = {} s exceeds {CFL_LIMIT}/alpha = {} s",
                    1.0 / n as f64,
                    CFL_LIMIT / alpha
                )))
            }
            Some(n) => n,
            None => min_sub,
        };
        let max_wind = config.env.air_velocity_mps.iter().copied().fold(0.0, f64::max);
        let max_sink = device.h + device.c_v * max_wind + device.fan.map_or(0.0, |f| f.amplitude);
        if max_sink / substeps as f64 >= 1.0 {
            return Err(SynthError::Config(format!(
                "cooling rate {max_sink}/s is unstable with {substeps} substeps"
            )));
        }

        let (dy, dx) = config.placement;
        let mask = device.chassis_mask(hgt, wid, dy, dx);
        let pixels: Vec<usize> = (0..hgt * wid).filter(|&k| mask.bits()[k]).collect();
        if pixels.is_empty() {
            return Err(SynthError::Config("chassis does not fit the frame".into()));
        }
        let (r0, c0, r1, c1) = mask.bbox().expect("non-empty chassis");
        let (bh, bw) = ((r1 - r0 + 1) as f64, (c1 - c0 + 1) as f64);
        let uv: Vec<(f64, f64)> = pixels
            .iter()
            .map(|&k| {
                let (r, c) = (k / wid, k % wid);
                ((c - c0) as f64 / bw, (r - r0) as f64 / bh)
            })
            .collect();
        let neighbours = pixels
            .iter()
            .map(|&k| {
                let (r, c) = (k / wid, k % wid);
                let pick = |ok: bool, n: usize| if ok && mask.bits()[n] { n } else { k };
                [
                    pick(r > 0, k.wrapping_sub(wid)),
                    pick(r + 1 < hgt, k + wid),
                    pick(c > 0, k.wrapping_sub(1)),
                    pick(c + 1 < wid, k + 1),
                ]
            })
            .collect();
        let blob = |u0: f64, v0: f64, sigma: f64| -> Vec<f64> {
            // sigma is in chassis widths; v is scaled to the same pixel units
            let aspect = bh / bw;
            uv.iter()
                .map(|&(u, v)| {
                    let du = u - u0;
                    let dv = (v - v0) * aspect;
                    (-(du * du + dv * dv) / (2.0 * sigma * sigma)).exp()
                })
                .collect()
        };

        let mut param_rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, 1));
        let noise_rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, 2));

        let mut idle = vec![device.resting; pixels.len()];
        for (name, i) in &device.idle {
            let s = device.slot(name).expect("validated slot");
            for (a, w) in idle.iter_mut().zip(blob(s.u, s.v, s.sigma)) {
                *a += i * w;
            }
        }
        let jitter = Normal::new(0.0, 1.0).expect("unit normal");
        let mut sources = Vec::new();
        for (name, i) in &app.sources {
            let s = device.slot(name).expect("validated slot");
            let z: f64 = jitter.sample(&mut param_rng);
            let phase = param_rng.random_range(0.0..TAU);
            let gain = if config.jitter {
                (1.0 + app.session_jitter * z).max(0.0)
            } else {
                1.0
            };
            let m = app.modulation.iter().find(|m| &m.slot == name);
            sources.push(ActiveSource {
                weights: blob(s.u, s.v, s.sigma),
                base: i * device.source_gain,
                gain,
                depth: m.map_or(0.0, |m| m.depth),
                period: m.map_or(1.0, |m| m.period_s),
                phase,
            });
        }
        let offsets: Vec<f64> = uv.iter().map(|&(u, v)| device.offset.at(u, v)).collect();

        let amb0 = config.env.ambient(0);
        let v0 = config.env.wind(0);
        let mut temps = vec![amb0; hgt * wid];
        // Start near the idle steady state so the warm-up converges quickly.
        let cool = device.h + device.c_v * v0;
        for (p, &k) in pixels.iter().enumerate() {
            if cool > 0.0 {
                temps[k] = amb0 + idle[p] / cool;
            }
        }
        let manifest = SessionManifest {
            session_id: session_id.to_string(),
            device_model: device.model.clone(),
            app_label: app.app_label.clone(),
            environment,
            phase_marks: config.phases.marks(config.start_ms),
            sample_rate_hz: 1.0,
        };
        let noise = (config.noise_std > 0.0)
            .then(|| Normal::new(0.0, config.noise_std).expect("valid noise std"));
        let attenuation = (REFERENCE_DISTANCE_CM / config.env.distance_cm).sqrt();
        let mut sim = Self {
            mask,
            scratch: temps.clone(),
            heat: vec![0.0; pixels.len()],
            solar_uv: uv,
            solar_px_scale: bh / bw,
            pixels,
            neighbours,
            offsets,
            idle,
            sources,
            alpha,
            h: device.h,
            c_v: device.c_v,
            fan: device.fan,
            fan_on: false,
            substeps,
            attenuation,
            temps,
            param_rng,
            noise_rng,
            noise,
            manifest,
            t: 0,
            config,
        };
        for _ in 0..sim.config.warmup_s {
            sim.advance(0, Phase::Baseline);
        }
        Ok(sim)
    }

    pub fn manifest(&self) -> &SessionManifest {
        &self.manifest
    }

    /// Ground-truth chassis mask.
    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    /// Noise-free temperature field (background at ambient).
    pub fn state(&self) -> &[f64] {
        &self.temps
    }

    pub fn substeps(&self) -> u32 {
        self.substeps
    }

    pub fn frames_total(&self) -> u32 {
        self.config.phases.total()
    }

    /// Noise-free maximum chassis temperature.
    pub fn max_chassis(&self) -> f64 {
        self.pixels.iter().map(|&k| self.temps[k]).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_chassis(&self) -> f64 {
        self.pixels.iter().map(|&k| self.temps[k]).fold(f64::INFINITY, f64::min)
    }

    /// Sum of chassis temperatures (heat content up to a constant factor).
    pub fn chassis_heat(&self) -> f64 {
        self.pixels.iter().map(|&k| self.temps[k]).sum()
    }

    /// Replace the air velocity from output second `t` onwards.
    pub fn set_wind_from(&mut self, t: usize, v: f64) {
        let w = &mut self.config.env.air_velocity_mps;
        let last = *w.last().expect("non-empty wind");
        if w.len() <= t {
            w.resize(t, last);
        } else {
            w.truncate(t);
        }
        w.push(v);
    }

    /// Source field for second `t`: idle plus app load when `phase` is loaded.
    fn fill_heat(&mut self, t: u32, phase: Phase) {
        self.heat.copy_from_slice(&self.idle);
        let loaded = matches!(phase, Phase::HeatUp | Phase::Steady);
        if loaded {
            let jitter = Normal::new(0.0, 1.0).expect("unit normal");
            for s in &self.sources {
                let mut i = s.base * s.gain * (1.0 + s.depth * (TAU * t as f64 / s.period + s.phase).sin());
                if self.config.jitter {
                    let z: f64 = jitter.sample(&mut self.param_rng);
                    i *= 1.0 + 0.03 * z;
                }
                for (h, w) in self.heat.iter_mut().zip(&s.weights) {
                    *h += i * w;
                }
            }
        }
        if let Some(sp) = self.config.env.solar {
            let total = self.config.phases.total().max(1) as f64;
            let u0 = sp.u_start + (sp.u_end - sp.u_start) * (t as f64 / total).min(1.0);
            let aspect = self.solar_px_scale;
            for (h, &(u, v)) in self.heat.iter_mut().zip(&self.solar_uv) {
                let du = u - u0;
                let dv = (v - sp.v) * aspect;
                *h += sp.intensity * (-(du * du + dv * dv) / (2.0 * sp.sigma * sp.sigma)).exp();
            }
        }
    }

    /// Advance the field by one second at environment second `t_env`.
    fn advance(&mut self, t_env: usize, phase: Phase) {
        self.fill_heat(self.t, phase);
        let amb = self.config.env.ambient(t_env);
        let v = self.config.env.wind(t_env);
        let fan_sink = match self.fan {
            Some(f) if self.fan_on && (self.t as f64 % f.period_s) < f.period_s / 2.0 => f.amplitude,
            _ => 0.0,
        };
        let sink = self.h + self.c_v * v + fan_sink;
        let dt = 1.0 / self.substeps as f64;
        for _ in 0..self.substeps {
            for (p, &k) in self.pixels.iter().enumerate() {
                let tk = self.temps[k];
                let nb = &self.neighbours[p];
                let lap = self.temps[nb[0]] + self.temps[nb[1]] + self.temps[nb[2]] + self.temps[nb[3]]
                    - 4.0 * tk;
                self.scratch[k] = tk + dt * (self.alpha * lap + self.heat[p] - sink * (tk - amb));
            }
            std::mem::swap(&mut self.temps, &mut self.scratch);
        }
        // Background follows the ambient.
        for (k, inside) in self.mask.bits().iter().enumerate() {
            if !inside {
                self.temps[k] = amb;
                self.scratch[k] = amb;
            }
        }
        if let Some(f) = self.fan {
            let m = self.max_chassis();
            if m > f.trigger_c {
                self.fan_on = true;
            } else if m < f.trigger_c - 1.0 {
                self.fan_on = false;
            }
        }
    }

    fn emit(&mut self, t: u32) -> SimFrame {
        let amb = self.config.env.ambient(t as usize);
        let mut out: Vec<f64> = self.temps.iter().map(|_| amb).collect();
        for (p, &k) in self.pixels.iter().enumerate() {
            out[k] = amb + (self.temps[k] - amb) * self.attenuation + self.offsets[p];
        }
        let mut sensor_noise = [0.0; 3];
        if let Some(n) = &self.noise {
            for v in out.iter_mut() {
                *v += n.sample(&mut self.noise_rng);
            }
            let unit = Normal::new(0.0, 1.0).expect("unit normal");
            for s in sensor_noise.iter_mut() {
                *s = unit.sample(&mut self.noise_rng);
            }
        }
        let ts = self.config.start_ms + t as i64 * 1000;
        let frame = RadiometricFrame::new(ts, t as usize, self.config.height, self.config.width, out)
            .expect("simulated frame is well-formed");
        let env = &self.config.env;
        let sensor = SensorSample {
            // sensor board reads a little after the camera
            timestamp_ms: ts + 40,
            ambient_c: amb + 0.02 * sensor_noise[0],
            humidity_pct: env.humidity_pct.clamp(0.0, 100.0),
            air_velocity_mps: (env.wind(t as usize) + 0.02 * sensor_noise[1]).max(0.0),
            distance_cm: (env.distance_cm + 0.2 * sensor_noise[2]).max(1.0),
        };
        SimFrame { frame, sensor }
    }
}

impl Iterator for Simulator {
    type Item = SimFrame;

    fn next(&mut self) -> Option<SimFrame> {
        let total = self.config.phases.total();
        if self.t >= total {
            return None;
        }
        let t = self.t;
        // Frame t shows the field after t seconds of recording.
        if t > 0 {
            let phase = self.config.phases.phase_at(t - 1);
            self.advance(t as usize - 1, phase);
        }
        let f = self.emit(t);
        self.t += 1;
        Some(f)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.config.phases.total() - self.t) as usize;
        (left, Some(left))
    }
}
