use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::frame_store::IDLE_LABEL;
use crate::roi::{Mask, MaskSource};

/// Headset outline in frame-relative units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChassisShape {
    /// Chassis width as a fraction of frame width.
    pub width_frac: f64,
    /// Width / height of the chassis bounding box.
    pub aspect: f64,
    /// Corner radius as a fraction of chassis height.
    pub corner: f64,
    /// Nose cut-out width and depth as fractions of chassis width and height.
    pub notch_w: f64,
    pub notch_h: f64,
}

/// Gaussian heat-source blob at chassis-relative `(u, v)`; `sigma` is a
/// fraction of chassis width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSlot {
    pub name: String,
    pub u: f64,
    pub v: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FanCurve {
    /// Maximum chassis temperature that switches the fan on (°C).
    pub trigger_c: f64,
    /// Sink coefficient while the fan blows (1/s), times `T - T_amb`.
    pub amplitude: f64,
    /// Pulse period; the fan blows during the first half.
    pub period_s: f64,
}

/// Device-specific resting pattern: `a1 sin(2π f_u u + φ) cos(2π f_v v) + a2 (u - 0.5)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffsetField {
    pub amplitude: f64,
    pub freq_u: f64,
    pub freq_v: f64,
    pub phase: f64,
    pub tilt: f64,
}

impl OffsetField {
    pub const ZERO: OffsetField = OffsetField {
        amplitude: 0.0,
        freq_u: 0.0,
        freq_v: 0.0,
        phase: 0.0,
        tilt: 0.0,
    };

    pub fn at(&self, u: f64, v: f64) -> f64 {
        use std::f64::consts::TAU;
        self.amplitude * (TAU * self.freq_u * u + self.phase).sin() * (TAU * self.freq_v * v).cos()
            + self.tilt * (u - 0.5)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceProfile {
    pub model: String,
    pub shape: ChassisShape,
    pub slots: Vec<SourceSlot>,
    /// Always-on sources (slot name, °C/s) present in every phase.
    pub idle: Vec<(String, f64)>,
    /// Uniform load over the whole chassis (°C/s): display, battery, board.
    #[serde(default)]
    pub resting: f64,
    /// Multiplier on app source intensities.
    pub source_gain: f64,
    pub fan: Option<FanCurve>,
    pub offset: OffsetField,
    /// Thermal diffusivity in px²/s at the 256-px reference frame width.
    pub alpha: f64,
    /// Ambient coupling (1/s).
    pub h: f64,
    /// Convective coupling per m/s of air velocity (1/s).
    pub c_v: f64,
}

/// Reference frame width for `alpha`.
pub const REFERENCE_WIDTH: usize = 256;

fn slot(name: &str, u: f64, v: f64, sigma: f64) -> SourceSlot {
    SourceSlot {
        name: name.into(),
        u,
        v,
        sigma,
    }
}

impl DeviceProfile {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Config(format!("device {}: {m}", self.model)));
        if !(self.alpha > 0.0) {
            return bad(format!("alpha {} must be > 0", self.alpha));
        }
        if self.resting < 0.0 {
            return bad(format!("resting load {} must be >= 0", self.resting));
        }
        if self.h < 0.0 || self.c_v < 0.0 {
            return bad("h and c_v must be >= 0".into());
        }
        let s = &self.shape;
        if !(s.width_frac > 0.0 && s.width_frac <= 0.95 && s.aspect >= 1.0) {
            return bad("chassis shape out of range".into());
        }
        for sl in &self.slots {
            if !(0.0..=1.0).contains(&sl.u) || !(0.0..=1.0).contains(&sl.v) || !(sl.sigma > 0.0) {
                return bad(format!("slot {} outside the chassis", sl.name));
            }
        }
        for (name, _) in &self.idle {
            if self.slot(name).is_none() {
                return bad(format!("unknown idle slot {name}"));
            }
        }
        if let Some(f) = &self.fan {
            if !(f.period_s > 0.0) || f.amplitude < 0.0 {
                return bad("fan period must be > 0 and amplitude >= 0".into());
            }
        }
        Ok(())
    }

    pub fn slot(&self, name: &str) -> Option<&SourceSlot> {
        self.slots.iter().find(|s| s.name == name)
    }

    /// Chassis mask placed at the frame centre shifted by `(dy, dx)` pixels.
    pub fn chassis_mask(&self, height: usize, width: usize, dy: f64, dx: f64) -> Mask {
        let s = &self.shape;
        let cw = s.width_frac * width as f64;
        let ch = cw / s.aspect;
        let (cy, cx) = (height as f64 / 2.0 + dy, width as f64 / 2.0 + dx);
        let (top, left) = (cy - ch / 2.0, cx - cw / 2.0);
        let radius = s.corner * ch;
        Mask::from_fn(height, width, MaskSource::Ingested, |r, c| {
            let (y, x) = (r as f64 + 0.5 - top, c as f64 + 0.5 - left);
            if !(0.0..ch).contains(&y) || !(0.0..cw).contains(&x) {
                return false;
            }
            // rounded corners
            let qx = (x - radius).min(cw - radius - x).min(0.0);
            let qy = (y - radius).min(ch - radius - y).min(0.0);
            if qx * qx + qy * qy > radius * radius {
                return false;
            }
            // nose cut-out: half ellipse rising from the bottom edge
            let (nw, nh) = (s.notch_w * cw / 2.0, s.notch_h * ch);
            let ex = (x - cw / 2.0) / nw;
            let ey = (ch - y) / nh;
            ex * ex + ey * ey > 1.0
        })
    }

    pub fn quest3() -> Self {
        Self {
            model: "quest3".into(),
            shape: ChassisShape {
                width_frac: 0.58,
                aspect: 2.0,
                corner: 0.3,
                notch_w: 0.22,
                notch_h: 0.32,
            },
            slots: vec![
                slot("soc", 0.5, 0.35, 0.10),
                slot("display_l", 0.28, 0.5, 0.12),
                slot("display_r", 0.72, 0.5, 0.12),
                slot("wifi", 0.15, 0.22, 0.06),
                slot("decoder", 0.85, 0.25, 0.06),
                slot("cam_tl", 0.1, 0.15, 0.05),
                slot("cam_tr", 0.9, 0.15, 0.05),
                slot("cam_bl", 0.12, 0.8, 0.05),
                slot("cam_br", 0.88, 0.8, 0.05),
                slot("pmic", 0.66, 0.62, 0.06),
            ],
            idle: vec![("soc".into(), 0.04), ("pmic".into(), 0.02)],
            resting: 0.08,
            source_gain: 1.0,
            fan: Some(FanCurve {
                trigger_c: 34.0,
                amplitude: 0.006,
                period_s: 20.0,
            }),
            offset: OffsetField {
                amplitude: 0.8,
                freq_u: 1.5,
                freq_v: 1.0,
                phase: 0.3,
                tilt: 0.5,
            },
            alpha: 0.3,
            h: 0.010,
            c_v: 0.010,
        }
    }

    pub fn quest2() -> Self {
        Self {
            model: "quest2".into(),
            shape: ChassisShape {
                width_frac: 0.55,
                aspect: 1.8,
                corner: 0.25,
                notch_w: 0.2,
                notch_h: 0.3,
            },
            slots: vec![
                slot("soc", 0.42, 0.42, 0.12),
                slot("display_l", 0.3, 0.55, 0.12),
                slot("display_r", 0.7, 0.55, 0.12),
                slot("wifi", 0.2, 0.15, 0.07),
                slot("decoder", 0.8, 0.3, 0.07),
                slot("cam_tl", 0.08, 0.2, 0.05),
                slot("cam_tr", 0.92, 0.2, 0.05),
                slot("cam_bl", 0.1, 0.75, 0.05),
                slot("cam_br", 0.9, 0.75, 0.05),
                slot("pmic", 0.3, 0.25, 0.06),
            ],
            idle: vec![("soc".into(), 0.05), ("pmic".into(), 0.03)],
            resting: 0.10,
            source_gain: 1.15,
            fan: Some(FanCurve {
                trigger_c: 36.0,
                amplitude: 0.008,
                period_s: 30.0,
            }),
            offset: OffsetField {
                amplitude: 1.2,
                freq_u: 1.0,
                freq_v: 2.0,
                phase: 1.1,
                tilt: -0.9,
            },
            alpha: 0.25,
            h: 0.012,
            c_v: 0.0125,
        }
    }

    pub fn vive_focus() -> Self {
        Self {
            model: "vive_focus".into(),
            shape: ChassisShape {
                width_frac: 0.62,
                aspect: 2.3,
                corner: 0.35,
                notch_w: 0.24,
                notch_h: 0.35,
            },
            slots: vec![
                slot("soc", 0.5, 0.28, 0.09),
                slot("display_l", 0.25, 0.45, 0.13),
                slot("display_r", 0.75, 0.45, 0.13),
                slot("wifi", 0.85, 0.2, 0.06),
                slot("decoder", 0.15, 0.3, 0.06),
                slot("cam_tl", 0.12, 0.12, 0.05),
                slot("cam_tr", 0.88, 0.12, 0.05),
                slot("cam_bl", 0.15, 0.85, 0.05),
                slot("cam_br", 0.85, 0.85, 0.05),
                slot("pmic", 0.5, 0.55, 0.07),
            ],
            idle: vec![("soc".into(), 0.03), ("pmic".into(), 0.03)],
            resting: 0.07,
            source_gain: 0.9,
            fan: Some(FanCurve {
                trigger_c: 33.0,
                amplitude: 0.005,
                period_s: 15.0,
            }),
            offset: OffsetField {
                amplitude: 1.0,
                freq_u: 2.0,
                freq_v: 0.5,
                phase: 2.0,
                tilt: 1.2,
            },
            alpha: 0.35,
            h: 0.009,
            c_v: 0.010,
        }
    }

    pub fn builtin(model: &str) -> Option<Self> {
        match model {
            "quest3" => Some(Self::quest3()),
            "quest2" => Some(Self::quest2()),
            "vive_focus" => Some(Self::vive_focus()),
            _ => None,
        }
    }
}

/// Sinusoidal intensity modulation of one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Modulation {
    pub slot: String,
    pub period_s: f64,
    pub depth: f64,
}

/// Application load: source intensities (°C/s) added during heat-up and
/// steady state, with modulation and per-session jitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppWorkloadProfile {
    pub app_label: String,
    pub sources: Vec<(String, f64)>,
    pub modulation: Vec<Modulation>,
    /// Relative std of the per-session gain of each source.
    pub session_jitter: f64,
    /// Relative std of second-to-second intensity noise.
    pub frame_jitter: f64,
}

/// Labels of the default suite, idle first.
pub const DEFAULT_APPS: [&str; 7] = [
    IDLE_LABEL,
    "youtube",
    "media_player",
    "zoom_web",
    "arkio",
    "first_hand",
    "vrfs",
];

fn src(list: &[(&str, f64)]) -> Vec<(String, f64)> {
    list.iter().map(|(n, v)| (n.to_string(), *v)).collect()
}

fn modul(slot: &str, period_s: f64, depth: f64) -> Modulation {
    Modulation {
        slot: slot.into(),
        period_s,
        depth,
    }
}

impl AppWorkloadProfile {
    pub fn validate(&self, device: &DeviceProfile) -> Result<(), SynthError> {
        for (name, v) in &self.sources {
            if device.slot(name).is_none() {
                return Err(SynthError::Config(format!(
                    "app {}: device {} has no slot {name}",
                    self.app_label, device.model
                )));
            }
            if !v.is_finite() || *v < 0.0 {
                return Err(SynthError::Config(format!("app {}: bad intensity {v}", self.app_label)));
            }
        }
        for m in &self.modulation {
            if !(m.period_s > 0.0) || !(0.0..1.0).contains(&m.depth) {
                return Err(SynthError::Config(format!(
                    "app {}: modulation needs period > 0 and depth in [0, 1)",
                    self.app_label
                )));
            }
        }
        Ok(())
    }

    /// Idle profile: no load beyond the device's always-on sources.
    pub fn idle() -> Self {
        Self {
            app_label: IDLE_LABEL.into(),
            sources: Vec::new(),
            modulation: Vec::new(),
            session_jitter: 0.0,
            frame_jitter: 0.0,
        }
    }

    pub fn builtin(label: &str) -> Option<Self> {
        let (sources, modulation) = match label {
            IDLE_LABEL => return Some(Self::idle()),
            "youtube" => (
                src(&[("soc", 0.05), ("wifi", 0.08), ("display_l", 0.02), ("display_r", 0.02)]),
                vec![modul("wifi", 30.0, 0.3)],
            ),
            "media_player" => (
                src(&[("soc", 0.05), ("decoder", 0.08), ("display_l", 0.02), ("display_r", 0.02)]),
                vec![modul("decoder", 45.0, 0.2)],
            ),
            "zoom_web" => (
                src(&[("soc", 0.07), ("wifi", 0.06), ("cam_tl", 0.05), ("cam_tr", 0.05)]),
                vec![modul("soc", 20.0, 0.25)],
            ),
            "arkio" => (
                src(&[
                    ("soc", 0.10),
                    ("display_l", 0.05),
                    ("display_r", 0.05),
                    ("cam_bl", 0.05),
                    ("cam_br", 0.05),
                    ("pmic", 0.04),
                ]),
                vec![modul("display_l", 40.0, 0.2)],
            ),
            "first_hand" => (
                src(&[
                    ("soc", 0.13),
                    ("cam_bl", 0.10),
                    ("cam_br", 0.10),
                    ("cam_tl", 0.06),
                    ("cam_tr", 0.06),
                    ("pmic", 0.05),
                ]),
                vec![modul("cam_bl", 15.0, 0.3), modul("cam_br", 15.0, 0.3)],
            ),
            "vrfs" => (
                src(&[
                    ("soc", 0.18),
                    ("display_l", 0.07),
                    ("display_r", 0.07),
                    ("pmic", 0.06),
                    ("decoder", 0.03),
                ]),
                vec![modul("soc", 60.0, 0.15)],
            ),
            _ => return None,
        };
        Some(Self {
            app_label: label.into(),
            sources,
            modulation,
            session_jitter: 0.06,
            frame_jitter: 0.03,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roi::{mask_geometry, validate_mask};

    #[test]
    fn builtin_chassis_masks_pass_the_filters() {
        for dev in ["quest3", "quest2", "vive_focus"] {
            let d = DeviceProfile::builtin(dev).unwrap();
            d.validate().unwrap();
            for (h, w) in [(192, 256), (96, 128), (48, 64)] {
                let q = mask_geometry(&d.chassis_mask(h, w, 2.0, -3.0));
                assert!(validate_mask(&q), "{dev} {h}x{w}: {q:?}");
            }
        }
    }

    #[test]
    fn builtin_apps_fit_every_device() {
        for dev in ["quest3", "quest2", "vive_focus"] {
            let d = DeviceProfile::builtin(dev).unwrap();
            for app in DEFAULT_APPS {
                AppWorkloadProfile::builtin(app).unwrap().validate(&d).unwrap();
            }
        }
        assert!(AppWorkloadProfile::builtin("nope").is_none());
    }

    #[test]
    fn bad_profiles_are_rejected() {
        let mut d = DeviceProfile::quest3();
        d.alpha = 0.0;
        assert!(d.validate().is_err());
        let mut a = AppWorkloadProfile::builtin("vrfs").unwrap();
        a.sources.push(("heatsink".into(), 0.1));
        assert!(a.validate(&DeviceProfile::quest3()).is_err());
    }
}
