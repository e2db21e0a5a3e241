//! WebAssembly bindings for the static demo page in `www/`.
//!
//! The page drives three operations: a live heat simulation of a headset
//! running an app (with a wind slider), grid features of the segmented
//! current frame, and the geometric check of a hand-drawn mask. Everything
//! that does real work is plain Rust so it can be tested natively.

use serde::Serialize;
use thermaltap::features::{cell_stats, spatial_gradient, GridSpec};
use thermaltap::frame_store::Environment;
use thermaltap::roi::{mask_geometry, segment_classical, Mask, MaskQuality, MaskSource, SegmentConfig};
use thermaltap::synth::{
    AppWorkloadProfile, DeviceProfile, EnvTrajectory, PhaseDurations, SimConfig, SimFrame,
    Simulator, DEFAULT_APPS,
};
use wasm_bindgen::prelude::*;

pub const DEVICES: [&str; 3] = ["quest3", "quest2", "vive_focus"];
/// Demo frame size; a quarter of the default synthetic resolution keeps
/// stepping smooth in the browser.
pub const DEMO_HEIGHT: usize = 96;
pub const DEMO_WIDTH: usize = 128;

/// Grid summary of one frame, serialized for the page. Missing cells are `null`.
#[derive(Debug, Clone, Serialize)]
pub struct GridView {
    pub n: usize,
    pub means: Vec<f64>,
    pub gradient: Vec<f64>,
    pub mask_area: usize,
    pub quality: MaskQuality,
}

/// A headset heating up under one app, one second per step.
#[wasm_bindgen]
pub struct HeatDemo {
    sim: Simulator,
    phases: PhaseDurations,
    frame: Option<SimFrame>,
    t: u32,
    wind: f64,
}

impl HeatDemo {
    pub fn create(device: &str, app: &str, ambient_c: f64, seed: u32) -> Result<Self, String> {
        let dev = DeviceProfile::builtin(device).ok_or_else(|| format!("unknown device {device:?}"))?;
        let prof = AppWorkloadProfile::builtin(app).ok_or_else(|| format!("unknown app {app:?}"))?;
        let mut cfg = SimConfig::new(DEMO_HEIGHT, DEMO_WIDTH, u64::from(seed));
        cfg.env = EnvTrajectory::constant(ambient_c, 0.0);
        cfg.warmup_s = 120;
        let phases = cfg.phases;
        let sim = Simulator::new("demo", &dev, &prof, Environment::Indoor, cfg).map_err(|e| e.to_string())?;
        Ok(Self {
            sim,
            phases,
            frame: None,
            t: 0,
            wind: 0.0,
        })
    }

    pub fn frame(&self) -> Option<&SimFrame> {
        self.frame.as_ref()
    }

    /// Grid means and gradients of the current frame under the contrast segmenter.
    pub fn grid_view(&self, n: usize, contrast_c: f64) -> Result<GridView, String> {
        let f = self.frame.as_ref().ok_or("no frame yet; step first")?;
        let grid = GridSpec::new(n).map_err(|e| e.to_string())?;
        let mask = segment_classical(&f.frame, f.sensor.ambient_c, &SegmentConfig { contrast_c });
        let stats = cell_stats(&f.frame, &mask, &grid);
        let means: Vec<f64> = stats.iter().map(|s| s.mean).collect();
        let gradient = spatial_gradient(&means, n);
        Ok(GridView {
            n,
            means,
            gradient,
            mask_area: mask.area(),
            quality: mask_geometry(&mask),
        })
    }
}

#[wasm_bindgen]
impl HeatDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(device: &str, app: &str, ambient_c: f64, seed: u32) -> Result<HeatDemo, JsError> {
        Self::create(device, app, ambient_c, seed).map_err(|e| JsError::new(&e))
    }

    /// Advance up to `seconds` frames; false once the session is over.
    pub fn step(&mut self, seconds: u32) -> bool {
        for _ in 0..seconds {
            match self.sim.next() {
                Some(f) => {
                    self.frame = Some(f);
                    self.t += 1;
                }
                None => return false,
            }
        }
        true
    }

    /// Air velocity (m/s) from the next frame on.
    pub fn set_wind(&mut self, v: f64) {
        self.wind = v.max(0.0);
        self.sim.set_wind_from(self.t as usize, self.wind);
    }

    pub fn width(&self) -> usize {
        DEMO_WIDTH
    }

    pub fn height(&self) -> usize {
        DEMO_HEIGHT
    }

    pub fn time_s(&self) -> u32 {
        self.t
    }

    pub fn total_s(&self) -> u32 {
        self.phases.total()
    }

    pub fn phase(&self) -> String {
        self.phases.phase_at(self.t.saturating_sub(1)).name().to_string()
    }

    /// Row-major temperatures of the current frame (empty before the first step).
    pub fn temps(&self) -> Vec<f64> {
        self.frame.as_ref().map_or_else(Vec::new, |f| f.frame.temps().to_vec())
    }

    pub fn ambient(&self) -> f64 {
        self.frame.as_ref().map_or(f64::NAN, |f| f.sensor.ambient_c)
    }

    /// JSON [`GridView`] of the current frame.
    pub fn grid(&self, n: usize, contrast_c: f64) -> Result<String, JsError> {
        let v = self.grid_view(n, contrast_c).map_err(|e| JsError::new(&e))?;
        Ok(serde_json::to_string(&v).expect("grid view serializes"))
    }
}

/// Geometry of a row-major 0/1 mask.
pub fn mask_quality(height: usize, width: usize, bits: &[u8]) -> Result<MaskQuality, String> {
    if height == 0 || width == 0 || bits.len() != height * width {
        return Err(format!("expected {} mask values, got {}", height * width, bits.len()));
    }
    let mask = Mask::new(height, width, bits.iter().map(|&b| b != 0).collect(), MaskSource::Ingested);
    Ok(mask_geometry(&mask))
}

/// JSON `MaskQuality` of a drawn mask.
#[wasm_bindgen]
pub fn check_mask(height: usize, width: usize, bits: &[u8]) -> Result<String, JsError> {
    let q = mask_quality(height, width, bits).map_err(|e| JsError::new(&e))?;
    Ok(serde_json::to_string(&q).expect("quality serializes"))
}

#[wasm_bindgen]
pub fn devices() -> Vec<String> {
    DEVICES.iter().map(|s| s.to_string()).collect()
}

#[wasm_bindgen]
pub fn apps() -> Vec<String> {
    DEFAULT_APPS.iter().map(|s| s.to_string()).collect()
}
