use aclab::config::RunConfig;
use aclab::experiments::{
    fit_rate, gronwall_fit, gronwall_spread, refinement_study, run_sweep, SweepPlan,
    QUANTITY_ERR_L1, QUANTITY_REL_ENTROPY,
};
use aclab::io::csv_string;
use aclab::Error;
use proptest::prelude::*;

fn plane_plan(epsilons: &str) -> RunConfig {
    RunConfig::from_json(&format!(
        r#"{{
            "trajectory": {{"type": "plane", "normal": [1.0]}},
            "stepper": {{"t_end": 0.02}},
            "sweep": {{
                "epsilons": {epsilons},
                "h_over_eps": 8,
                "dt_rule": {{"rule": "eps-squared", "factor": 0.05}},
                "record_interval": 0.002
            }}
        }}"#
    ))
    .unwrap()
}

#[test]
fn fit_needs_three_positive_points() {
    assert!(matches!(
        fit_rate(&[(0.1, 1.0), (0.05, 0.5)]),
        Err(Error::InsufficientData { needed: 3, got: 2 })
    ));
    assert!(matches!(
        fit_rate(&[(0.1, 1.0), (0.05, 0.0), (0.02, 0.1)]),
        Err(Error::NonPositive { index: 1, .. })
    ));
}

proptest! {
    #[test]
    fn fit_recovers_power_laws(slope in 0.2f64..4.0, c in 0.01f64..100.0) {
        let pts: Vec<(f64, f64)> = [0.2, 0.1, 0.05, 0.025]
            .iter()
            .map(|&e: &f64| (e, c * e.powf(slope)))
            .collect();
        let fit = fit_rate(&pts).unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-10);
        prop_assert!(fit.residual < 1e-10);
    }

    #[test]
    fn gronwall_fit_bounds_exponential_series(rate in 0.1f64..3.0) {
        let series: Vec<(f64, f64)> = (0..20).map(|k| {
            let t = 0.01 * k as f64;
            (t, 1e-3 * (rate * t).exp())
        }).collect();
        let fit = gronwall_fit(&series);
        prop_assert!(!fit.degenerate);
        prop_assert!((fit.c_hat - rate).abs() < 1e-6 * rate.max(1.0));
    }
}

#[test]
fn spread_of_equal_constants_is_one() {
    assert_eq!(gronwall_spread(&[1.5, 1.5, 1.5]), 1.0);
    assert!(gronwall_spread(&[1.0, 3.0]) >= 3.0 - 1e-12);
}

#[test]
fn short_sweeps_are_rejected() {
    let plan = SweepPlan::from_config(&plane_plan("[0.1, 0.05]"));
    assert!(matches!(plan, Err(Error::InvalidConfig(_))));
}

#[test]
fn plane_sweep_rates_and_determinism() {
    let plan = SweepPlan::from_config(&plane_plan("[0.16, 0.08, 0.04]")).unwrap();
    let (report, members) = run_sweep(&plan).unwrap();
    assert_eq!(members.len(), 3);
    let l1 = report.slope(QUANTITY_ERR_L1).unwrap();
    let e = report.slope(QUANTITY_REL_ENTROPY).unwrap();
    assert!((l1 - 1.0).abs() < 0.2, "{l1}");
    assert!((e - 2.0).abs() < 0.3, "{e}");

    let (_, again) = run_sweep(&plan).unwrap();
    for (a, b) in members.iter().zip(&again) {
        assert_eq!(csv_string(&a.output.records), csv_string(&b.output.records));
    }
}

#[test]
fn identity_residual_converges_under_refinement() {
    let cfg = RunConfig::from_json(
        r#"{
            "epsilon": 0.1,
            "trajectory": {"type": "plane", "normal": [1.0]},
            "stepper": {"dt": 1e-4, "t_end": 0.01},
            "diagnostics": {"cadence": 10, "identity": true}
        }"#,
    )
    .unwrap()
    .resolve()
    .unwrap();
    let report = refinement_study(&cfg, 3).unwrap();
    assert_eq!(report.levels.len(), 3);
    assert!(report.identity_converged(1.0), "{:?}", report.identity_orders);
}
