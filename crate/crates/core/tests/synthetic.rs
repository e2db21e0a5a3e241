//! Physical sanity of the simulator and recovery of known generator constants.

use thermaltap::features::{frame_features, wind_observations, GridSpec, SessionFeatures};
use thermaltap::frame_store::{window_phases, Environment, Phase};
use thermaltap::normalize::fit_wind_coefficient;
use thermaltap::synth::{
    AppWorkloadProfile, DeviceProfile, EnvTrajectory, Modulation, OffsetField, SimConfig, Simulator,
};

fn bare_device() -> DeviceProfile {
    let mut d = DeviceProfile::quest3();
    d.idle.clear();
    d.resting = 0.0;
    d.fan = None;
    d.offset = OffsetField::ZERO;
    d
}

fn steady_app(label: &str) -> AppWorkloadProfile {
    AppWorkloadProfile {
        modulation: Vec::new(),
        session_jitter: 0.0,
        frame_jitter: 0.0,
        ..AppWorkloadProfile::builtin(label).unwrap()
    }
}

fn quiet(h: usize, w: usize, ambient: f64, wind: f64) -> SimConfig {
    SimConfig {
        noise_std: 0.0,
        jitter: false,
        warmup_s: 0,
        env: EnvTrajectory::constant(ambient, wind),
        ..SimConfig::new(h, w, 3)
    }
}

fn chassis_values(sim_mask: &thermaltap::roi::Mask, temps: &[f64]) -> Vec<f64> {
    sim_mask.bits().iter().zip(temps).filter(|(b, _)| **b).map(|(_, t)| *t).collect()
}

#[test]
fn uniform_load_settles_at_the_single_cell_equilibrium() {
    // A uniform source on an insulated chassis makes every pixel the scalar
    // ODE dT/dt = S - (h + c_v v)(T - T_amb), so T_inf = T_amb + S / (h + c_v v).
    let mut d = bare_device();
    d.resting = 0.05;
    let (amb, v) = (18.0, 1.5);
    let t_inf = amb + d.resting / (d.h + d.c_v * v);
    let sim = Simulator::new("s", &d, &AppWorkloadProfile::idle(), Environment::Indoor, quiet(48, 64, amb, v)).unwrap();
    let mask = sim.mask().clone();
    let last = sim.last().unwrap();
    for t in chassis_values(&mask, last.frame.temps()) {
        assert!((t - t_inf).abs() < 1e-6, "{t} vs {t_inf}");
    }
}

#[test]
fn relaxation_follows_the_exponential() {
    // Start at the still-air equilibrium, then switch on wind: the excess decays
    // towards the new equilibrium with rate r = h + c_v v. The field advances in
    // one explicit step per second, so the excess follows (1 - r)^t exactly and
    // stays within r^2 t / 2 of exp(-r t).
    let mut d = bare_device();
    d.resting = 0.04;
    let (amb, v) = (20.0, 2.0);
    let mut sim = Simulator::new("s", &d, &AppWorkloadProfile::idle(), Environment::Indoor, quiet(32, 48, amb, 0.0)).unwrap();
    sim.set_wind_from(0, v);
    let (e0, e_inf, rate) = (d.resting / d.h, d.resting / (d.h + d.c_v * v), d.h + d.c_v * v);
    for (t, f) in sim.by_ref().take(120).enumerate() {
        let t = t as i32;
        let want = amb + e_inf + (e0 - e_inf) * (1.0 - rate).powi(t);
        let got = f.frame.temps()[16 * 48 + 24];
        assert!((got - want).abs() < 1e-9, "t={t}: {got} vs {want}");
        let smooth = amb + e_inf + (e0 - e_inf) * (-rate * t as f64).exp();
        assert!((got - smooth).abs() <= (e0 - e_inf) * rate * rate * t as f64 / 2.0 + 1e-12);
    }
}

#[test]
fn no_losses_means_every_source_unit_is_kept() {
    // With h = c_v = 0 diffusion only moves heat around, so the summed chassis
    // temperature grows by exactly sum(S) each second.
    let mut d = bare_device();
    d.h = 0.0;
    d.c_v = 0.0;
    let app = steady_app("vrfs");
    let mut cfg = quiet(48, 64, 20.0, 0.0);
    cfg.phases.baseline_s = 0;
    let mut sim = Simulator::new("s", &d, &app, Environment::Indoor, cfg).unwrap();
    // frame 0 is the initial field
    sim.next();
    let before = sim.chassis_heat();
    sim.next();
    let step = sim.chassis_heat() - before;
    assert!(step > 0.0);
    let mut prev = sim.chassis_heat();
    for _ in 0..50 {
        sim.next();
        let now = sim.chassis_heat();
        assert!((now - prev - step).abs() < 1e-9 * now.abs(), "{} vs {step}", now - prev);
        prev = now;
    }
    // Without sources nothing moves off ambient.
    let mut none = Simulator::new("s", &d, &AppWorkloadProfile::idle(), Environment::Indoor, quiet(48, 64, 20.0, 0.0)).unwrap();
    for _ in 0..200 {
        none.next();
    }
    assert!((none.chassis_heat() - 20.0 * none.mask().area() as f64).abs() < 1e-6);
}

#[test]
fn sensor_noise_has_the_configured_spread() {
    let d = bare_device();
    let sigma = 0.08;
    let mut cfg = quiet(64, 64, 22.0, 0.0);
    cfg.noise_std = sigma;
    let sim = Simulator::new("s", &d, &AppWorkloadProfile::idle(), Environment::Indoor, cfg).unwrap();
    let resid: Vec<f64> = sim.take(5).flat_map(|f| f.frame.temps().iter().map(|t| t - 22.0).collect::<Vec<_>>()).collect();
    let n = resid.len() as f64;
    let mean = resid.iter().sum::<f64>() / n;
    let std = (resid.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt();
    assert!(mean.abs() < 0.01);
    assert!((std - sigma).abs() <= 0.2 * sigma, "std {std}");
}

#[test]
fn wind_coefficient_is_recovered() {
    // Quasi-steady modulation: delta magnitudes scale as 1 / (h + c_v v), i.e.
    // as 1 / (1 + k v) with k = c_v / h = 0.3.
    let mut d = bare_device();
    d.h = 0.5;
    d.c_v = 0.15;
    d.alpha = 0.05;
    let app = AppWorkloadProfile {
        modulation: vec![Modulation {
            slot: "soc".into(),
            period_s: 90.0,
            depth: 0.8,
        }],
        ..steady_app("vrfs")
    };
    let grid = GridSpec::new(4).unwrap();
    let mut obs = Vec::new();
    for v in [0.0, 0.5, 1.0, 2.0, 3.0] {
        let sim = Simulator::new("s", &d, &app, Environment::Outdoor, quiet(48, 64, 15.0, v)).unwrap();
        let mask = sim.mask().clone();
        let mut sf = SessionFeatures::new(sim.manifest().clone(), grid.n);
        for f in sim {
            let ff = frame_features(&f.frame, &mask, &grid);
            sf.push(f.frame.timestamp_ms(), ff, Some(f.sensor));
        }
        for w in window_phases(&sf.manifest, &sf.timestamps, &[Phase::Steady], 60, 60) {
            obs.extend(wind_observations(&w, &sf, &[5, 30], true));
        }
    }
    let fit = fit_wind_coefficient(&obs);
    assert!(fit.warning.is_none());
    assert!((fit.model.k - 0.3).abs() <= 0.1, "k = {}", fit.model.k);
}
