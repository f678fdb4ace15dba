use aclab::config::RunConfig;
use aclab::diagnostics::{coercivity_check, dissipation_residuals};
use aclab::solver::{run, Simulation};
use aclab::Error;

fn config(json: &str) -> aclab::solver::SimulationConfig {
    RunConfig::from_json(json).unwrap().resolve().unwrap()
}

fn small_circle(mode: &str) -> aclab::solver::SimulationConfig {
    config(&format!(
        r#"{{
            "epsilon": 0.1,
            "trajectory": {{"type": "sphere", "d": 2, "R0": 1.0}},
            "grid": {{"mode": "{mode}"}},
            "stepper": {{"dt": 2.5e-4, "t_end": 0.05}},
            "diagnostics": {{"cadence": 20}}
        }}"#
    ))
}

#[test]
fn energy_decreases_and_field_stays_bounded() {
    let out = run(&small_circle("radial")).unwrap();
    assert_eq!(out.clamp_events, 0);
    assert!(out.final_field.max_abs() <= 1.0 + 1e-12);
    for w in out.records.windows(2) {
        assert!(w[1].gl_energy <= w[0].gl_energy + 1e-12, "{} -> {}", w[0].gl_energy, w[1].gl_energy);
    }
}

#[test]
fn records_land_on_cadence_and_end_time() {
    let cfg = small_circle("radial");
    let out = run(&cfg).unwrap();
    assert_eq!(out.steps, 200);
    assert_eq!(out.records.len(), 11);
    assert_eq!(out.records[0].t, 0.0);
    assert!((out.records.last().unwrap().t - 0.05).abs() < 1e-12);
}

#[test]
fn circle_stays_close_to_exact_flow() {
    let cfg = small_circle("radial");
    let out = run(&cfg).unwrap();
    for b in &out.records {
        assert!(b.err_l1 < 5.0 * cfg.epsilon, "t = {}: {}", b.t, b.err_l1);
        assert!(coercivity_check(b, &cfg.cutoff).pass());
    }
}

#[test]
fn radial_and_full_grids_agree_on_a_circle() {
    let radial = run(&small_circle("radial")).unwrap();
    let full = run(&small_circle("full")).unwrap();
    let a = radial.records.last().unwrap();
    let b = full.records.last().unwrap();
    assert!((a.rel_entropy - b.rel_entropy).abs() < 0.05 * b.rel_entropy, "{} vs {}", a.rel_entropy, b.rel_entropy);
    assert!((a.err_l1 - b.err_l1).abs() < 0.05 * b.err_l1, "{} vs {}", a.err_l1, b.err_l1);
}

#[test]
fn discrete_energy_identity_holds_on_each_interval() {
    let out = run(&small_circle("radial")).unwrap();
    let r = dissipation_residuals(&out.records);
    assert_eq!(r.len(), out.records.len() - 1);
    assert!(r.iter().all(|v| *v < 0.2), "{r:?}");
}

#[test]
fn plane_profile_barely_moves() {
    let cfg = config(
        r#"{
            "epsilon": 0.05,
            "trajectory": {"type": "plane", "normal": [1.0]},
            "stepper": {"t_end": 0.05}
        }"#,
    );
    let sim = Simulation::new(cfg).unwrap();
    let u0 = sim.initial_data();
    let out = sim.run().unwrap();
    let drift = u0
        .values
        .iter()
        .zip(&out.final_field.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(drift < 1e-2, "{drift}");
}

#[test]
fn snapshots_are_kept_at_requested_times() {
    let cfg = config(
        r#"{
            "epsilon": 0.05,
            "trajectory": {"type": "plane", "normal": [1.0]},
            "stepper": {"t_end": 0.02},
            "diagnostics": {"snapshots": [0.0, 0.01, 0.02]}
        }"#,
    );
    let out = run(&cfg).unwrap();
    let times: Vec<f64> = out.snapshots.iter().map(|s| s.t).collect();
    assert_eq!(times.len(), 3);
    for (t, want) in times.iter().zip([0.0, 0.01, 0.02]) {
        assert!((t - want).abs() < 1e-12);
    }
}

#[test]
fn coarse_grid_is_rejected_with_its_key() {
    let raw = RunConfig::from_json(
        r#"{
            "epsilon": 0.05,
            "trajectory": {"type": "plane", "normal": [1.0]},
            "grid": {"h": 0.025},
            "stepper": {"t_end": 0.01}
        }"#,
    )
    .unwrap();
    match raw.resolve().and_then(Simulation::new) {
        Err(Error::InvalidConfig(v)) => assert!(v.iter().any(|v| v.key == "grid.h"), "{v:?}"),
        other => panic!("expected grid.h violation, got {other:?}"),
    }
}

#[test]
fn unknown_keys_are_rejected() {
    let r = RunConfig::from_json(r#"{"epsilon": 0.1, "stepper": {"t_end": 1, "tend": 2}}"#);
    assert!(r.is_err());
}
