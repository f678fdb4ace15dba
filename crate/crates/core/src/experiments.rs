//! ε-sweeps, refinement studies, and the fits run on them.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Bands, DtRule, RunConfig, SweepSection};
use crate::diagnostics::{coercivity_check, dissipation_residuals, EntropyBreakdown};
use crate::error::{Error, Result, Violation};
use crate::grid::GridMode;
use crate::solver::{RunOutput, Simulation, SimulationConfig};

/// `E(0)` at or below this is treated as zero by [`gronwall_fit`].
pub const GRONWALL_FLOOR: f64 = 1e-14;

/// Gronwall constants below this rate are compared as if equal to it when
/// judging their spread across a sweep.
pub const GRONWALL_RATE_FLOOR: f64 = 0.05;

/// Relative tolerance of `E(t) ≤ E(0) e^{Ĉt}` along a run.
pub const GRONWALL_TOL: f64 = 1.05;

/// Residuals at or below this are at round-off and count as converged.
pub const RESIDUAL_FLOOR: f64 = 1e-10;

pub const QUANTITY_ERR_L1: &str = "sup_err_l1";
pub const QUANTITY_REL_ENTROPY: &str = "sup_rel_entropy";
pub const QUANTITY_INITIAL_ENTROPY: &str = "initial_entropy";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit in `log q`.
    pub residual: f64,
}

/// Least-squares slope of `log q` against `log ε`.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: points.len(),
        });
    }
    for (i, &(e, q)) in points.iter().enumerate() {
        if !(e > 0.0) {
            return Err(Error::NonPositive { index: i, value: e });
        }
        if !(q > 0.0) {
            return Err(Error::NonPositive { index: i, value: q });
        }
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InvalidArgument("rate fit needs distinct ε values".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(RateFit {
        slope,
        intercept,
        residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GronwallFit {
    pub c_hat: f64,
    /// `E(0)` at the floor, or some `E(t) ≤ 0`: `Ĉ` is reported as 0.
    pub degenerate: bool,
}

/// Smallest `Ĉ ≥ 0` with `E(t) ≤ E(0) e^{Ĉt}` on the series.
pub fn gronwall_fit(series: &[(f64, f64)]) -> GronwallFit {
    let degenerate = GronwallFit {
        c_hat: 0.0,
        degenerate: true,
    };
    let Some(&(t0, e0)) = series.first() else {
        return degenerate;
    };
    if !(e0 > GRONWALL_FLOOR) || series.iter().any(|&(_, e)| !(e > 0.0)) {
        return degenerate;
    }
    let c_hat = series
        .iter()
        .filter(|&&(t, _)| t > t0)
        .map(|&(t, e)| (e / e0).ln() / (t - t0))
        .fold(0.0f64, f64::max);
    GronwallFit {
        c_hat,
        degenerate: false,
    }
}

/// `max_t E(t) / (E(0) e^{Ĉt})` along the series.
pub fn gronwall_ratio(series: &[(f64, f64)], c_hat: f64) -> f64 {
    let Some(&(t0, e0)) = series.first() else {
        return 0.0;
    };
    series
        .iter()
        .map(|&(t, e)| e / (e0 * (c_hat * (t - t0)).exp()))
        .fold(0.0, f64::max)
}

/// Largest ratio between constants after raising each to [`GRONWALL_RATE_FLOOR`].
pub fn gronwall_spread(constants: &[f64]) -> f64 {
    let lifted = constants.iter().map(|c| c.max(GRONWALL_RATE_FLOOR));
    let (lo, hi) = lifted.fold((f64::INFINITY, 0.0f64), |(lo, hi), c| (lo.min(c), hi.max(c)));
    if constants.is_empty() {
        1.0
    } else {
        hi / lo
    }
}

/// An ε-sweep: a base configuration and the rules coupling it to `ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub base: RunConfig,
    pub epsilons: Vec<f64>,
    pub h_over_eps: f64,
    pub dt_rule: DtRule,
    pub record_interval: Option<f64>,
    pub bands: Bands,
}

impl SweepPlan {
    /// Read and validate the plan from a configuration with a `sweep` section.
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        let Some(s) = &cfg.sweep else {
            return Err(Error::InvalidConfig(vec![Violation::new(
                "sweep",
                "a sweep plan needs a sweep section",
            )]));
        };
        let plan = Self::new(cfg.clone(), s);
        plan.check()?;
        Ok(plan)
    }

    pub fn new(base: RunConfig, s: &SweepSection) -> Self {
        Self {
            base,
            epsilons: s.epsilons.clone(),
            h_over_eps: s.h_over_eps,
            dt_rule: s.dt_rule,
            record_interval: s.record_interval,
            bands: s.bands.clone(),
        }
    }

    /// Plan-level rules: at least three distinct descending `ε` spanning a
    /// factor of four, and a positive resolution ratio.
    pub fn validate(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        let e = &self.epsilons;
        if e.len() < 3 {
            v.push(Violation::new(
                "sweep.epsilons",
                format!("need at least 3 values, got {}", e.len()),
            ));
        }
        if e.iter().any(|x| !(*x > 0.0)) {
            v.push(Violation::new("sweep.epsilons", "values must be positive"));
        } else if e.windows(2).any(|w| !(w[0] > w[1])) {
            v.push(Violation::new("sweep.epsilons", "values must be strictly descending"));
        } else if e.len() >= 2 && e[0] < 4.0 * e[e.len() - 1] {
            v.push(Violation::new("sweep.epsilons", "values must span at least a factor 4"));
        }
        if !(self.h_over_eps >= 4.0) {
            v.push(Violation::new(
                "sweep.h_over_eps",
                format!("must be at least 4, got {}", self.h_over_eps),
            ));
        }
        v
    }

    /// Configuration of the member at `eps`.
    pub fn member_config(&self, eps: f64) -> RunConfig {
        let mut c = self.base.with_epsilon(eps);
        c.grid.n = None;
        c.grid.h = Some(eps / self.h_over_eps);
        c.stepper.dt = Some(self.dt_rule.dt(eps));
        if let Some(r) = self.record_interval {
            c.diagnostics.record_interval = Some(r);
            c.diagnostics.cadence = None;
        }
        c.sweep = None;
        c
    }

    pub fn member(&self, eps: f64) -> Result<SimulationConfig> {
        self.member_config(eps)
            .resolve()
            .map_err(|e| Error::Member {
                epsilon: eps,
                source: Box::new(e),
            })
    }

    fn check(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(v))
        }
    }
}

/// Summary of one sweep member.
#[derive(Debug, Clone, Serialize)]
pub struct MemberSummary {
    pub epsilon: f64,
    pub h: f64,
    pub dt: f64,
    pub steps: usize,
    pub records: usize,
    pub sup_err_l1: f64,
    pub sup_rel_entropy: f64,
    pub initial_entropy: f64,
    pub gronwall: GronwallFit,
    pub gronwall_ratio: f64,
    pub coercivity_violations: usize,
    pub clamp_events: usize,
}

/// One sweep member with its full diagnostic series.
#[derive(Debug, Clone)]
pub struct MemberRun {
    pub config: SimulationConfig,
    pub output: RunOutput,
    pub summary: MemberSummary,
}

pub fn summarize(cfg: &SimulationConfig, out: &RunOutput) -> MemberSummary {
    let r = &out.records;
    let series: Vec<(f64, f64)> = r.iter().map(|b| (b.t, b.rel_entropy)).collect();
    let gronwall = gronwall_fit(&series);
    MemberSummary {
        epsilon: cfg.epsilon,
        h: cfg.grid.spacing(),
        dt: out.dt,
        steps: out.steps,
        records: r.len(),
        sup_err_l1: r.iter().map(|b| b.err_l1).fold(0.0, f64::max),
        sup_rel_entropy: r.iter().map(|b| b.rel_entropy).fold(0.0, f64::max),
        initial_entropy: r.first().map_or(0.0, |b| b.rel_entropy),
        gronwall,
        gronwall_ratio: gronwall_ratio(&series, gronwall.c_hat),
        coercivity_violations: r
            .iter()
            .filter(|b| !coercivity_check(b, &cfg.cutoff).pass())
            .count(),
        clamp_events: out.clamp_events,
    }
}

/// Sweep results in the shape written to the summary document.
#[derive(Debug, Clone, Serialize)]
pub struct RateReport {
    pub epsilons: Vec<f64>,
    pub quantities: BTreeMap<String, Vec<f64>>,
    pub slopes: BTreeMap<String, RateFit>,
    pub gronwall_constants: Vec<f64>,
    pub pass_flags: BTreeMap<String, bool>,
    pub bands: Bands,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub members: Vec<MemberSummary>,
}

impl RateReport {
    pub fn pass(&self) -> bool {
        self.pass_flags.values().all(|p| *p)
    }

    pub fn slope(&self, quantity: &str) -> Option<f64> {
        self.slopes.get(quantity).map(|f| f.slope)
    }
}

fn in_band(x: f64, band: [f64; 2]) -> bool {
    x >= band[0] && x <= band[1]
}

fn fit_quantity(eps: &[f64], q: &[f64]) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = eps.iter().copied().zip(q.iter().copied()).collect();
    fit_rate(&pts)
}

/// `E[u_ε|I](0)` per `ε` and its fitted rate; no time stepping.
pub fn initial_entropy_study(plan: &SweepPlan) -> Result<RateReport> {
    plan.check()?;
    let values = plan
        .epsilons
        .par_iter()
        .map(|&eps| {
            let label = |e: Error| Error::Member {
                epsilon: eps,
                source: Box::new(e),
            };
            let sim = Simulation::new(plan.member(eps)?).map_err(label)?;
            let u = sim.initial_data();
            let b = sim.evaluator().evaluate(&u.values, 0.0, false).map_err(label)?;
            Ok(b.rel_entropy)
        })
        .collect::<Result<Vec<f64>>>()?;
    let fit = fit_quantity(&plan.epsilons, &values)?;
    let pass = in_band(fit.slope, plan.bands.initial_entropy);
    Ok(RateReport {
        epsilons: plan.epsilons.clone(),
        quantities: BTreeMap::from([(QUANTITY_INITIAL_ENTROPY.to_string(), values)]),
        slopes: BTreeMap::from([(QUANTITY_INITIAL_ENTROPY.to_string(), fit)]),
        gronwall_constants: Vec::new(),
        pass_flags: BTreeMap::from([(QUANTITY_INITIAL_ENTROPY.to_string(), pass)]),
        bands: plan.bands.clone(),
        members: Vec::new(),
    })
}

/// Run every member (concurrently) and return them in plan order.
pub fn run_members(plan: &SweepPlan) -> Result<Vec<MemberRun>> {
    plan.check()?;
    plan.epsilons
        .par_iter()
        .map(|&eps| {
            let config = plan.member(eps)?;
            let output = Simulation::new(config.clone())
                .and_then(|s| s.run())
                .map_err(|e| Error::Member {
                    epsilon: eps,
                    source: Box::new(e),
                })?;
            let summary = summarize(&config, &output);
            Ok(MemberRun {
                config,
                output,
                summary,
            })
        })
        .collect()
}

/// Assemble the rate report of completed members.
pub fn rate_report(plan: &SweepPlan, members: &[MemberRun]) -> Result<RateReport> {
    let eps: Vec<f64> = members.iter().map(|m| m.summary.epsilon).collect();
    let col = |f: fn(&MemberSummary) -> f64| members.iter().map(|m| f(&m.summary)).collect::<Vec<_>>();
    let quantities = BTreeMap::from([
        (QUANTITY_ERR_L1.to_string(), col(|s| s.sup_err_l1)),
        (QUANTITY_REL_ENTROPY.to_string(), col(|s| s.sup_rel_entropy)),
        (QUANTITY_INITIAL_ENTROPY.to_string(), col(|s| s.initial_entropy)),
    ]);
    let mut slopes = BTreeMap::new();
    for (k, q) in &quantities {
        slopes.insert(k.clone(), fit_quantity(&eps, q)?);
    }
    let constants = col(|s| s.gronwall.c_hat);
    let bands = &plan.bands;
    let mut pass_flags = BTreeMap::new();
    pass_flags.insert(
        QUANTITY_ERR_L1.to_string(),
        in_band(slopes[QUANTITY_ERR_L1].slope, bands.err_l1),
    );
    pass_flags.insert(
        QUANTITY_REL_ENTROPY.to_string(),
        in_band(slopes[QUANTITY_REL_ENTROPY].slope, bands.rel_entropy),
    );
    pass_flags.insert(
        "gronwall".to_string(),
        gronwall_spread(&constants) < bands.gronwall_spread
            && members.iter().all(|m| m.summary.gronwall_ratio <= GRONWALL_TOL),
    );
    pass_flags.insert(
        "coercivity".to_string(),
        members.iter().all(|m| m.summary.coercivity_violations == 0),
    );
    Ok(RateReport {
        epsilons: eps,
        quantities,
        slopes,
        gronwall_constants: constants,
        pass_flags,
        bands: bands.clone(),
        members: members.iter().map(|m| m.summary.clone()).collect(),
    })
}

/// Run the sweep and fit both rates.
pub fn run_sweep(plan: &SweepPlan) -> Result<(RateReport, Vec<MemberRun>)> {
    let members = run_members(plan)?;
    let report = rate_report(plan, &members)?;
    Ok((report, members))
}

/// One level of a refinement study.
#[derive(Debug, Clone, Serialize)]
pub struct RefinementLevel {
    pub h: f64,
    pub dt: f64,
    pub steps: usize,
    pub records: usize,
    /// Largest identity residual over the interior records.
    pub identity_residual: Option<f64>,
    /// Largest relative dissipation residual between consecutive records.
    pub dissipation_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RefinementReport {
    pub levels: Vec<RefinementLevel>,
    /// `log2` of successive residual ratios.
    pub identity_orders: Vec<f64>,
    pub dissipation_orders: Vec<f64>,
}

impl RefinementReport {
    pub fn min_identity_order(&self) -> Option<f64> {
        self.identity_orders.iter().copied().reduce(f64::min)
    }

    pub fn min_dissipation_order(&self) -> Option<f64> {
        self.dissipation_orders.iter().copied().reduce(f64::min)
    }

    /// Every successive order is at least `order`, or the finest residual
    /// is already at round-off.
    pub fn identity_converged(&self, order: f64) -> bool {
        let finest = self.levels.last().and_then(|l| l.identity_residual);
        match (finest, self.min_identity_order()) {
            (Some(r), _) if r <= RESIDUAL_FLOOR => true,
            (Some(_), Some(o)) => o >= order,
            _ => false,
        }
    }

    pub fn dissipation_converged(&self, order: f64) -> bool {
        let finest = self.levels.last().map(|l| l.dissipation_residual);
        match (finest, self.min_dissipation_order()) {
            (Some(r), _) if r <= RESIDUAL_FLOOR => true,
            (Some(_), Some(o)) => o >= order,
            _ => false,
        }
    }
}

/// `cfg` with `h` and `Δt` divided by `2^level`; the cadence is multiplied
/// so that records fall at the same times.
pub fn refined(cfg: &SimulationConfig, level: u32) -> SimulationConfig {
    let f = 1usize << level;
    let mut c = cfg.clone();
    c.grid.n = match c.grid.mode {
        GridMode::Full => c.grid.n * f,
        GridMode::Radial => (c.grid.n - 1) * f + 1,
    };
    c.stepper.dt = cfg.stepper.dt / f as f64;
    c.diagnostics.cadence = cfg.diagnostics.cadence * f;
    c
}

fn orders(values: &[f64]) -> Vec<f64> {
    values.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

pub fn max_identity_residual(records: &[EntropyBreakdown]) -> Option<f64> {
    records
        .iter()
        .filter_map(|b| b.identity_residual)
        .reduce(f64::max)
}

/// Run `cfg` at `levels` joint `(h, Δt)` halvings and measure how the
/// identity and dissipation residuals shrink.
pub fn refinement_study(cfg: &SimulationConfig, levels: u32) -> Result<RefinementReport> {
    if levels < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: levels as usize,
        });
    }
    let levels = (0..levels)
        .into_par_iter()
        .map(|l| {
            let c = refined(cfg, l);
            let out = Simulation::new(c.clone())?.run()?;
            Ok(RefinementLevel {
                h: c.grid.spacing(),
                dt: out.dt,
                steps: out.steps,
                records: out.records.len(),
                identity_residual: max_identity_residual(&out.records),
                dissipation_residual: dissipation_residuals(&out.records)
                    .into_iter()
                    .fold(0.0, f64::max),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ident: Option<Vec<f64>> = levels.iter().map(|l| l.identity_residual).collect();
    let diss: Vec<f64> = levels.iter().map(|l| l.dissipation_residual).collect();
    Ok(RefinementReport {
        identity_orders: ident.as_deref().map(orders).unwrap_or_default(),
        dissipation_orders: orders(&diss),
        levels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_laws() {
        let f = fit_rate(&[(0.1, 0.02), (0.05, 0.01), (0.025, 0.005)]).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-12);
        assert!(f.residual < 1e-12);
        let f = fit_rate(&[(0.1, 0.01), (0.05, 0.0025), (0.025, 0.000625)]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
    }

    #[test]
    fn noisy_rate_matches_normal_equations() {
        let pts = [(0.1, 0.0213), (0.05, 0.0104), (0.025, 0.0051)];
        // oracle: slope = Σ(x - x̄)(y - ȳ) / Σ(x - x̄)² with x = log ε, y = log q,
        // written out for three equally spaced abscissae
        let (x1, x3) = (0.1f64.ln(), 0.025f64.ln());
        let expected = (0.0213f64.ln() - 0.0051f64.ln()) / (x1 - x3);
        let f = fit_rate(&pts).unwrap();
        assert!((f.slope - expected).abs() < 1e-12);
        assert!((f.slope - 1.03).abs() < 0.02);
    }

    #[test]
    fn fit_preconditions() {
        assert!(matches!(
            fit_rate(&[(0.1, 1.0), (0.05, 0.5)]),
            Err(Error::InsufficientData { .. })
        ));
        assert!(matches!(
            fit_rate(&[(0.1, 1.0), (0.05, 0.0), (0.02, 0.1)]),
            Err(Error::NonPositive { index: 1, .. })
        ));
    }

    #[test]
    fn gronwall_exponential() {
        let s: Vec<(f64, f64)> = (0..20).map(|k| (0.01 * k as f64, 0.3 * (0.03 * k as f64).exp())).collect();
        let g = gronwall_fit(&s);
        assert!(!g.degenerate);
        assert!((g.c_hat - 3.0).abs() < 1e-9);
        assert!((gronwall_ratio(&s, g.c_hat) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn gronwall_clips_and_flags() {
        let s = [(0.0, 1.0), (0.1, 0.9), (0.2, 0.5)];
        assert_eq!(gronwall_fit(&s).c_hat, 0.0);
        assert!(!gronwall_fit(&s).degenerate);
        assert!(gronwall_fit(&[(0.0, 0.0), (0.1, 1.0)]).degenerate);
        assert!(gronwall_fit(&[]).degenerate);
    }

    #[test]
    fn spread_of_constants() {
        assert_eq!(gronwall_spread(&[0.0, 0.0, 0.0]), 1.0);
        assert_eq!(gronwall_spread(&[1.0, 1.5, 0.75]), 2.0);
        assert_eq!(gronwall_spread(&[0.0, 0.02]), 1.0);
    }

    fn plan(epsilons: Vec<f64>) -> SweepPlan {
        let base = RunConfig::from_json(
            r#"{"trajectory": {"type": "plane", "normal": [1.0]}, "stepper": {"t_end": 0.0}}"#,
        )
        .unwrap();
        SweepPlan {
            base,
            epsilons,
            h_over_eps: 8.0,
            dt_rule: DtRule::default(),
            record_interval: None,
            bands: Bands::default(),
        }
    }

    #[test]
    fn plan_validation() {
        assert!(!plan(vec![]).validate().is_empty());
        assert!(!plan(vec![0.1]).validate().is_empty());
        assert!(!plan(vec![0.1, 0.2, 0.05]).validate().is_empty());
        assert!(!plan(vec![0.1, 0.08, 0.06]).validate().is_empty());
        assert!(plan(vec![0.16, 0.08, 0.04]).validate().is_empty());
        assert!(initial_entropy_study(&plan(vec![0.1])).is_err());
    }

    #[test]
    fn members_follow_the_coupling() {
        let p = plan(vec![0.16, 0.08, 0.04]);
        let hs: Vec<f64> = p
            .epsilons
            .iter()
            .map(|&e| p.member(e).unwrap().grid.spacing() / e)
            .collect();
        assert!(hs.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(hs.iter().all(|r| *r <= 1.0 / 8.0 + 1e-12));
    }

    #[test]
    fn refinement_keeps_record_times() {
        let c = plan(vec![0.16, 0.08, 0.04]).member(0.08).unwrap();
        let r = refined(&c, 2);
        assert!((r.grid.spacing() - c.grid.spacing() / 4.0).abs() < 1e-15);
        assert_eq!(r.diagnostics.cadence, 4 * c.diagnostics.cadence);
        assert_eq!(r.stepper.dt * 4.0, c.stepper.dt);
    }
}
