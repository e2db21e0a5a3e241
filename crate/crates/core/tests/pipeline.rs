use thermaltap::config::{Normalization, RunConfig};
use thermaltap::eval::{plan_for, run_experiment, session_windows, FittedPipeline, Protocol, TrainingSession};
use thermaltap::features::{GridSpec, SessionFeatures};
use thermaltap::synth::{simulate_features, PhaseDurations, SuiteSpec};

fn small_suite(spec: SuiteSpec) -> Vec<SessionFeatures> {
    let spec = SuiteSpec {
        height: 48,
        width: 64,
        phases: PhaseDurations {
            baseline_s: 20,
            heat_up_s: 40,
            steady_s: 60,
            cool_down_s: 10,
        },
        ..spec
    };
    let grid = GridSpec::new(4).unwrap();
    spec.sessions(2)
        .iter()
        .map(|p| simulate_features(p, &spec, &[grid]).unwrap().remove(0))
        .collect()
}

fn config() -> RunConfig {
    let mut c = RunConfig {
        grid_n: 4,
        normalization: Normalization::parse("all").unwrap(),
        ..RunConfig::default()
    };
    c.forest.trees = 15;
    c
}

#[test]
fn fitted_pipeline_survives_a_save_load_round_trip() {
    let sessions = small_suite(SuiteSpec::cross_device(2));
    let cfg = config();
    let windows: Vec<_> = sessions.iter().map(|s| session_windows(s, &cfg)).collect();
    let train: Vec<TrainingSession<'_>> = sessions
        .iter()
        .zip(&windows)
        .map(|(session, w)| TrainingSession {
            session,
            windows: w,
            cached: None,
        })
        .collect();
    let pipe = FittedPipeline::fit(&train, &[], &cfg, cfg.seed).unwrap();
    assert!(pipe.normalizers.wind_k.is_some());
    assert_eq!(pipe.normalizers.baselines.as_ref().unwrap().baselines.len(), 3);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pipeline.json");
    pipe.save(&path).unwrap();
    let back = FittedPipeline::load(&path).unwrap();
    assert_eq!(back, pipe);
    for (s, w) in sessions.iter().zip(&windows).take(5) {
        let v = pipe.session_vectors(s, w, None).unwrap();
        let a = pipe.infer_vectors(&s.manifest.session_id, &v).unwrap();
        let b = back.infer_vectors(&s.manifest.session_id, &back.session_vectors(s, w, None).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    std::fs::write(&path, r#"{"version":"0"}"#).unwrap();
    assert!(FittedPipeline::load(&path).is_err());
}

#[test]
fn experiments_are_reproducible() {
    let sessions = small_suite(SuiteSpec::indoor_outdoor(2, 3));
    let mut cfg = config();
    cfg.protocol = Protocol::Transfer;
    cfg.few_shot_count = 2;
    let plan = plan_for(&sessions, &cfg).unwrap();
    let a = run_experiment(&sessions, &plan, &cfg).unwrap();
    let b = run_experiment(&sessions, &plan, &cfg).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    assert!(a.app_windows.is_some());

    cfg.seed += 1;
    let plan = plan_for(&sessions, &cfg).unwrap();
    let c = run_experiment(&sessions, &plan, &cfg).unwrap();
    assert_ne!(a.to_json(), c.to_json());
}
