use serde::{Deserialize, Serialize};

/// Upper clamp for the fitted wind coefficient.
pub const MAX_WIND_K: f64 = 2.0;
/// Minimum spread of observed air velocity (m/s) needed to fit `k`.
pub const MIN_VELOCITY_SPREAD: f64 = 0.2;

/// Thermal load: cell temperature minus ambient.
#[inline]
pub fn ambient_correct(cell_temp: f64, ambient_c: f64) -> f64 {
    cell_temp - ambient_c
}

/// Convective compensation of a temperature change: `delta * (1 + k v)`.
#[inline]
pub fn wind_correct(delta: f64, air_velocity: f64, k: f64) -> f64 {
    delta * (1.0 + k * air_velocity)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindModel {
    pub k: f64,
}

/// One wind-fit observation: a temperature-change magnitude measured at a
/// mean air velocity. Observations sharing `group` are expected to agree once
/// corrected (same app, cell and lag).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindObservation {
    pub group: u64,
    pub magnitude: f64,
    pub velocity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindFit {
    pub model: WindModel,
    pub warning: Option<String>,
}

/// Least-squares `k` minimising the within-group variance of `m (1 + k v)`.
///
/// With `a = m - mean_g(m)` and `b = m v - mean_g(m v)` the objective
/// `sum (a + k b)^2` is quadratic, so `k = -sum(a b) / sum(b^2)`, clamped to
/// `[0, 2]`. A velocity range under 0.2 m/s yields `k = 0` with a warning.
pub fn fit_wind_coefficient(obs: &[WindObservation]) -> WindFit {
    let finite: Vec<&WindObservation> = obs
        .iter()
        .filter(|o| o.magnitude.is_finite() && o.velocity.is_finite())
        .collect();
    let (vmin, vmax) = finite.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), o| {
        (lo.min(o.velocity), hi.max(o.velocity))
    });
    if finite.is_empty() || vmax - vmin < MIN_VELOCITY_SPREAD {
        let warning = format!(
            "air velocity spread {:.3} m/s below {MIN_VELOCITY_SPREAD}; wind coefficient set to 0",
            if finite.is_empty() { 0.0 } else { vmax - vmin }
        );
        return WindFit {
            model: WindModel { k: 0.0 },
            warning: Some(warning),
        };
    }
    let mut groups: std::collections::BTreeMap<u64, (f64, f64, usize)> = Default::default();
    for o in &finite {
        let e = groups.entry(o.group).or_default();
        e.0 += o.magnitude;
        e.1 += o.magnitude * o.velocity;
        e.2 += 1;
    }
    let (mut sab, mut sbb) = (0.0, 0.0);
    for o in &finite {
        let (sm, smv, cnt) = groups[&o.group];
        let a = o.magnitude - sm / cnt as f64;
        let b = o.magnitude * o.velocity - smv / cnt as f64;
        sab += a * b;
        sbb += b * b;
    }
    let k = if sbb > 0.0 { (-sab / sbb).clamp(0.0, MAX_WIND_K) } else { 0.0 };
    WindFit {
        model: WindModel { k },
        warning: None,
    }
}
