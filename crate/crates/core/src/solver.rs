//! Time integration of `∂_t u = Δu - ε⁻² W'(u)`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{fill_identity_residuals, EntropyBreakdown, Evaluator, CLAMP_TOL};
use crate::error::{Error, Result, Violation};
use crate::geometry::{Cutoff, Trajectory};
use crate::grid::{Grid, GridMode, ScalarField};
use crate::potential::{solve_profile, Potential, PotentialConfig, ProfileTable, DEFAULT_SAMPLES, DEFAULT_S_MAX};

/// Abort threshold on `max|u|`.
pub const BLOW_UP: f64 = 2.0;

/// Required `|u|` on the outer boundary layer of the initial field.
pub const BOUNDARY_FLATNESS: f64 = 1e-6;

/// Lower bound on `R(T)` in units of `ε`.
pub const EXTINCTION_GUARD_EPS: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepperKind {
    /// `(I - Δt Δ) u' = u - Δt W'(u)/ε²`.
    SemiImplicit,
    /// Forward Euler.
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub mode: GridMode,
    pub dim: usize,
    pub half_width: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn spacing(&self) -> f64 {
        match self.mode {
            GridMode::Full => 2.0 * self.half_width / self.n as f64,
            GridMode::Radial => self.half_width / (self.n.max(2) - 1) as f64,
        }
    }

    pub fn build(&self) -> Result<Grid> {
        match self.mode {
            GridMode::Full => Grid::full(self.dim, self.half_width, self.n),
            GridMode::Radial => Grid::radial(self.dim, self.half_width, self.n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepperSpec {
    pub kind: StepperKind,
    pub dt: f64,
    pub t_end: f64,
}

impl StepperSpec {
    /// Number of steps; the step is shortened so that the last one lands on `t_end`.
    pub fn steps(&self) -> usize {
        if self.t_end <= 0.0 {
            0
        } else {
            (self.t_end / self.dt - 1e-9).ceil().max(1.0) as usize
        }
    }

    pub fn effective_dt(&self) -> f64 {
        match self.steps() {
            0 => self.dt,
            n => self.t_end / n as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSpec {
    /// Record every `cadence` steps (and always the last step).
    pub cadence: usize,
    /// Times at which the field is retained; each maps to the first record at or after it.
    #[serde(default)]
    pub snapshots: Vec<f64>,
    /// Assemble the right-hand side of the entropy evolution formula at each record.
    pub identity: bool,
    /// Length scale of the weighted interface error.
    pub s0: f64,
}

/// A fully resolved run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub epsilon: f64,
    pub potential: PotentialConfig,
    pub trajectory: Trajectory,
    pub cutoff: Cutoff,
    pub grid: GridSpec,
    pub stepper: StepperSpec,
    pub diagnostics: DiagnosticsSpec,
}

impl SimulationConfig {
    /// Every violated invariant, keyed by its configuration path.
    pub fn validate(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        let eps = self.epsilon;
        if !(eps > 0.0 && eps.is_finite()) {
            v.push(Violation::new("epsilon", format!("must be positive, got {eps}")));
            return v;
        }
        let potential = match self.potential.build() {
            Ok(p) => Some(p),
            Err(e) => {
                v.push(Violation::new("potential.name", e.to_string()));
                None
            }
        };
        if let Err(e) = self.trajectory.check() {
            v.push(Violation::new("trajectory", e.to_string()));
            return v;
        }
        let c = &self.cutoff;
        if !(c.r_c > 0.0 && c.r_c.is_finite()) {
            v.push(Violation::new("cutoff.r_c", format!("must be positive, got {}", c.r_c)));
        }
        if !(c.c_quad > 0.0 && c.c_quad < 4.0) {
            v.push(Violation::new(
                "cutoff.c_quad",
                format!("must lie in (0, 4) so that η ≥ 0, got {}", c.c_quad),
            ));
        }

        let g = &self.grid;
        let traj_dim = self.trajectory.dim();
        match g.mode {
            GridMode::Full => {
                if !(1..=2).contains(&g.dim) {
                    v.push(Violation::new("grid.dim", format!("full grids need d ∈ {{1, 2}}, got {}", g.dim)));
                }
            }
            GridMode::Radial => match &self.trajectory {
                Trajectory::Sphere { center, .. } => {
                    if center.as_ref().is_some_and(|c| c.iter().any(|x| *x != 0.0)) {
                        v.push(Violation::new(
                            "trajectory.center",
                            "radial grids need a sphere centered at the origin",
                        ));
                    }
                }
                Trajectory::Plane { .. } => v.push(Violation::new(
                    "grid.mode",
                    "radial grids need a sphere trajectory",
                )),
            },
        }
        if g.dim != traj_dim {
            v.push(Violation::new(
                "grid.dim",
                format!("grid dimension {} differs from trajectory dimension {traj_dim}", g.dim),
            ));
        }
        if g.n < 4 {
            v.push(Violation::new("grid.n", format!("need at least 4 points per axis, got {}", g.n)));
        }
        if !(g.half_width > 0.0 && g.half_width.is_finite()) {
            v.push(Violation::new("grid.half_width", format!("must be positive, got {}", g.half_width)));
        }
        let h = g.spacing();
        if !(h <= eps / 4.0) {
            v.push(Violation::new(
                "grid.h",
                format!("transition layer unresolved: h = {h} exceeds ε/4 = {}", eps / 4.0),
            ));
        }

        let s = &self.stepper;
        if !(s.dt > 0.0 && s.dt.is_finite()) {
            v.push(Violation::new("stepper.dt", format!("must be positive, got {}", s.dt)));
        } else if let Some(p) = &potential {
            let limit = eps * eps / (2.0 * p.max_ddw_on_unit_interval());
            if s.dt > limit {
                v.push(Violation::new(
                    "stepper.dt",
                    format!("Δt = {} exceeds ε²/(2 max W'') = {limit}", s.dt),
                ));
            }
            if s.kind == StepperKind::Explicit {
                let cfl = h * h / (2.0 * g.dim as f64);
                if s.dt > cfl {
                    v.push(Violation::new(
                        "stepper.dt",
                        format!("explicit Δt = {} exceeds h²/(2d) = {cfl}", s.dt),
                    ));
                }
            }
        }
        if !(s.t_end >= 0.0 && s.t_end.is_finite()) {
            v.push(Violation::new("stepper.t_end", format!("must be nonnegative, got {}", s.t_end)));
        } else if let Some(r_end) = self.trajectory.radius(s.t_end) {
            let guard = (2.0 * c.r_c).max(EXTINCTION_GUARD_EPS * eps);
            if !(r_end >= guard) {
                v.push(Violation::new(
                    "stepper.t_end",
                    format!(
                        "R(T) = {r_end} is below max(2 r_c, {EXTINCTION_GUARD_EPS} ε) = {guard}; the flow is too close to extinction"
                    ),
                ));
            }
            if !(c.r_c < r_end) {
                v.push(Violation::new(
                    "cutoff.r_c",
                    format!("r_c = {} must stay below min R(t) = {r_end}", c.r_c),
                ));
            }
        }

        let d = &self.diagnostics;
        if d.cadence == 0 {
            v.push(Violation::new("diagnostics.cadence", "must be at least 1"));
        }
        if !(d.s0 > 0.0) {
            v.push(Violation::new("diagnostics.s0", format!("must be positive, got {}", d.s0)));
        }
        if let Some(t) = d.snapshots.iter().find(|t| !(**t >= 0.0 && **t <= s.t_end)) {
            v.push(Violation::new(
                "diagnostics.snapshots",
                format!("snapshot time {t} outside [0, {}]", s.t_end),
            ));
        }

        if v.is_empty() {
            if let Some(p) = &potential {
                self.check_boundary_layer(p, &mut v);
            }
        }
        v
    }

    fn check_boundary_layer(&self, p: &Potential, v: &mut Vec<Violation>) {
        let Ok(profile) = solve_profile(p, DEFAULT_S_MAX, DEFAULT_SAMPLES) else {
            v.push(Violation::new("potential.name", "profile ODE did not converge"));
            return;
        };
        let Ok(grid) = self.grid.build() else { return };
        let worst = grid
            .boundary_indices()
            .into_iter()
            .map(|k| {
                let dist = self.trajectory.signed_distance(&grid.point(k), 0.0);
                profile.eval(dist / self.epsilon).abs()
            })
            .fold(1.0, f64::min);
        if worst < 1.0 - BOUNDARY_FLATNESS {
            v.push(Violation::new(
                "grid.half_width",
                format!(
                    "box too small: |u| = {worst} on the boundary, need ≥ 1 - {BOUNDARY_FLATNESS:e}"
                ),
            ));
        }
    }
}

/// A retained field.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<EntropyBreakdown>,
    pub snapshots: Vec<Snapshot>,
    pub steps: usize,
    pub dt: f64,
    /// Sum over steps of the points outside `[-1, 1]` beyond the clamp tolerance.
    pub clamp_events: usize,
    pub final_field: ScalarField,
}

/// A validated configuration with its potential, profile and grid built.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub config: SimulationConfig,
    pub potential: Potential,
    pub profile: ProfileTable,
    pub grid: Arc<Grid>,
}

struct Workspace {
    rhs: Vec<f64>,
    lap: Vec<f64>,
    next: Vec<f64>,
}

impl Simulation {
    pub fn new(config: SimulationConfig) -> Result<Self> {
        let violations = config.validate();
        if !violations.is_empty() {
            return Err(Error::InvalidConfig(violations));
        }
        let potential = config.potential.build()?;
        let profile = solve_profile(&potential, DEFAULT_S_MAX, DEFAULT_SAMPLES)?;
        let grid = Arc::new(config.grid.build()?);
        Ok(Self {
            config,
            potential,
            profile,
            grid,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.config.epsilon
    }

    /// `u(x, 0) = θ(dist±(x, I(0))/ε)`.
    pub fn initial_data(&self) -> ScalarField {
        let eps = self.config.epsilon;
        let values = (0..self.grid.len())
            .map(|k| {
                let dist = self.config.trajectory.signed_distance(&self.grid.point(k), 0.0);
                self.profile.eval(dist / eps)
            })
            .collect();
        ScalarField::new(self.grid.clone(), values)
    }

    fn workspace(&self) -> Workspace {
        let n = self.grid.len();
        Workspace {
            rhs: vec![0.0; n],
            lap: vec![0.0; n],
            next: vec![0.0; n],
        }
    }

    fn advance(&self, u: &mut [f64], dt: f64, ws: &mut Workspace) -> Result<()> {
        let inv_eps2 = 1.0 / (self.config.epsilon * self.config.epsilon);
        let p = &self.potential;
        match self.config.stepper.kind {
            StepperKind::SemiImplicit => {
                for (r, &v) in ws.rhs.iter_mut().zip(u.iter()) {
                    *r = v - dt * p.dw(v) * inv_eps2;
                }
                self.grid.solve_shifted(dt, &ws.rhs, &mut ws.next)?;
            }
            StepperKind::Explicit => {
                self.grid.laplacian(u, &mut ws.lap);
                for k in 0..u.len() {
                    ws.next[k] = u[k] + dt * (ws.lap[k] - p.dw(u[k]) * inv_eps2);
                }
            }
        }
        u.copy_from_slice(&ws.next);
        Ok(())
    }

    /// One step of length `dt` from `u`.
    pub fn step(&self, u: &ScalarField, dt: f64) -> Result<ScalarField> {
        let mut next = u.clone();
        let mut ws = self.workspace();
        self.advance(&mut next.values, dt, &mut ws)?;
        let max_abs = next.max_abs();
        if !(max_abs <= BLOW_UP) {
            return Err(Error::BlowUp {
                step: 1,
                time: dt,
                max_abs,
            });
        }
        Ok(next)
    }

    pub fn evaluator(&self) -> Evaluator<'_> {
        let mut ev = Evaluator::new(
            &self.grid,
            &self.potential,
            self.config.epsilon,
            &self.config.trajectory,
            &self.config.cutoff,
        );
        ev.s0 = self.config.diagnostics.s0;
        ev
    }

    /// Advance from the initial data to `t_end`, recording diagnostics.
    pub fn run(&self) -> Result<RunOutput> {
        let steps = self.config.stepper.steps();
        let dt = self.config.stepper.effective_dt();
        let diag = &self.config.diagnostics;
        let ev = self.evaluator();
        let mut u = self.initial_data();
        let mut ws = self.workspace();
        let mut records = Vec::with_capacity(steps / diag.cadence + 2);
        let mut snapshots = Vec::new();
        let mut pending: Vec<f64> = diag.snapshots.clone();
        pending.sort_by(f64::total_cmp);
        pending.dedup();
        let mut pending = pending.into_iter().peekable();
        let mut clamp_events = 0;

        let mut record = |step: usize, u: &ScalarField, records: &mut Vec<EntropyBreakdown>| -> Result<()> {
            let t = if step == steps { self.config.stepper.t_end.max(0.0) } else { step as f64 * dt };
            records.push(ev.evaluate(&u.values, t, diag.identity)?);
            while pending.peek().is_some_and(|&s| s <= t + 1e-12) {
                pending.next();
                if snapshots.last().map(|s: &Snapshot| s.step) != Some(step) {
                    snapshots.push(Snapshot {
                        step,
                        t,
                        values: u.values.clone(),
                    });
                }
            }
            Ok(())
        };

        record(0, &u, &mut records)?;
        for step in 1..=steps {
            self.advance(&mut u.values, dt, &mut ws)?;
            let max_abs = u.max_abs();
            if !(max_abs <= BLOW_UP) {
                return Err(Error::BlowUp {
                    step,
                    time: step as f64 * dt,
                    max_abs,
                });
            }
            clamp_events += u.excursions(CLAMP_TOL);
            if step % diag.cadence == 0 || step == steps {
                record(step, &u, &mut records)?;
            }
        }
        if diag.identity {
            fill_identity_residuals(&mut records);
        }
        Ok(RunOutput {
            records,
            snapshots,
            steps,
            dt,
            clamp_events,
            final_field: u,
        })
    }
}

/// Convenience: build and return the initial field.
pub fn initial_data(cfg: &SimulationConfig) -> Result<ScalarField> {
    Ok(Simulation::new(cfg.clone())?.initial_data())
}

/// Convenience: validate, build and run.
pub fn run(cfg: &SimulationConfig) -> Result<RunOutput> {
    Simulation::new(cfg.clone())?.run()
}

/// Radius of the zero level set of a radial field, by linear interpolation
/// between the first sign change from the axis outward.
pub fn radial_level_set(grid: &Grid, u: &[f64]) -> Option<f64> {
    let h = grid.spacing();
    u.windows(2).enumerate().find_map(|(i, w)| {
        (w[0] > 0.0 && w[1] <= 0.0).then(|| (i as f64 + w[0] / (w[0] - w[1])) * h)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn plane_config(eps: f64, n: usize, t_end: f64) -> SimulationConfig {
        SimulationConfig {
            epsilon: eps,
            potential: PotentialConfig::default(),
            trajectory: Trajectory::plane(vec![1.0], 0.0).unwrap(),
            cutoff: Cutoff::new(0.5, 1.0),
            grid: GridSpec {
                mode: GridMode::Full,
                dim: 1,
                half_width: 1.0,
                n,
            },
            stepper: StepperSpec {
                kind: StepperKind::SemiImplicit,
                dt: eps * eps / 20.0,
                t_end,
            },
            diagnostics: DiagnosticsSpec {
                cadence: 1,
                snapshots: vec![],
                identity: true,
                s0: 0.125,
            },
        }
    }

    #[test]
    fn initial_profile_values() {
        // N = 340 puts a cell center at x = 0.05
        let sim = Simulation::new(plane_config(0.05, 340, 0.0)).unwrap();
        let u = sim.initial_data();
        let k = 178;
        assert!((sim.grid.point(k)[0] - 0.05).abs() < 1e-14);
        assert!((u.values[k] - 0.905_148_253_644_866_6).abs() < 1e-8);
        assert!((u.values[169] + u.values[170]).abs() < 1e-15);
        let th1 = sim.profile.eval(1.0);
        assert!((th1 - 0.905_148_253_644_866_6).abs() < 1e-8);
        for (k, v) in u.values.iter().enumerate() {
            let x = sim.grid.point(k)[0];
            if x >= 0.5 {
                assert!(*v >= 1.0 - 1e-6);
            }
            assert!(v.abs() <= 1.0);
        }
    }

    #[test]
    fn constants_are_fixed_points() {
        let sim = Simulation::new(plane_config(0.05, 320, 0.0)).unwrap();
        for c in [1.0, -1.0] {
            let u = ScalarField::constant(sim.grid.clone(), c);
            let next = sim.step(&u, sim.config.stepper.dt).unwrap();
            assert!(next.values.iter().all(|&v| (v - c).abs() <= 4.0 * f64::EPSILON));
        }
    }

    #[test]
    fn zero_time_run_has_one_record() {
        let out = run(&plane_config(0.05, 320, 0.0)).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.steps, 0);
    }

    #[test]
    fn cadence_one_records_every_step() {
        let mut cfg = plane_config(0.05, 320, 0.0);
        cfg.stepper.t_end = 7.0 * cfg.stepper.dt;
        let out = run(&cfg).unwrap();
        assert_eq!(out.steps, 7);
        assert_eq!(out.records.len(), 8);
        assert!(out.records[0].identity_residual.is_none());
        assert!(out.records[3].identity_residual.is_some());
        assert!(out.records[7].identity_residual.is_none());
    }

    #[test]
    fn validation_names_the_resolution_rule() {
        let mut cfg = plane_config(0.05, 320, 0.1);
        cfg.grid.n = 80; // h = ε/2
        let v = cfg.validate();
        assert!(v.iter().any(|x| x.key == "grid.h"), "{v:?}");
        let mut cfg = plane_config(0.05, 320, 0.1);
        cfg.stepper.dt = 1e-3;
        assert!(cfg.validate().iter().any(|x| x.key == "stepper.dt"));
        let mut cfg = plane_config(0.05, 320, 0.1);
        cfg.grid.half_width = 0.2;
        cfg.grid.n = 64;
        assert!(cfg.validate().iter().any(|x| x.key == "grid.half_width"));
    }

    #[test]
    fn extinction_guard() {
        let mut cfg = plane_config(0.02, 320, 0.3);
        cfg.trajectory = Trajectory::sphere(2, 1.0, None).unwrap();
        cfg.grid = GridSpec {
            mode: GridMode::Radial,
            dim: 2,
            half_width: 1.5,
            n: 601,
        };
        cfg.cutoff = Cutoff::new(0.3, 1.0);
        assert!(cfg.validate().is_empty(), "{:?}", cfg.validate());
        cfg.stepper.t_end = 0.48; // R = 0.2 < 2 r_c
        assert!(cfg.validate().iter().any(|x| x.key == "stepper.t_end"));
    }

    #[test]
    fn semi_implicit_respects_the_maximum_principle() {
        let mut cfg = plane_config(0.05, 320, 0.05);
        cfg.stepper.dt = cfg.epsilon * cfg.epsilon / 18.0;
        cfg.diagnostics.cadence = 50;
        let out = run(&cfg).unwrap();
        assert_eq!(out.clamp_events, 0);
        assert!(out.final_field.max_abs() <= 1.0 + 1e-12);
    }

    #[test]
    fn explicit_matches_semi_implicit_for_small_steps() {
        let mut cfg = plane_config(0.1, 160, 0.02);
        cfg.trajectory = Trajectory::plane(vec![1.0], 0.1).unwrap();
        cfg.stepper.dt = 1e-5;
        cfg.diagnostics.cadence = 1000;
        let a = run(&cfg).unwrap();
        cfg.stepper.kind = StepperKind::Explicit;
        let b = run(&cfg).unwrap();
        let diff = a
            .final_field
            .values
            .iter()
            .zip(&b.final_field.values)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-3, "{diff}");
    }

    #[test]
    fn blow_up_is_reported() {
        let mut cfg = plane_config(0.05, 320, 0.01);
        cfg.stepper.kind = StepperKind::Explicit;
        let sim = Simulation::new({
            let mut c = cfg.clone();
            c.stepper.dt = 1e-6;
            c
        })
        .unwrap();
        // a step far beyond the explicit stability limit
        let u = sim.initial_data();
        let mut bad = sim.clone();
        bad.config.stepper.kind = StepperKind::Explicit;
        let mut v = u.clone();
        let mut err = None;
        for _ in 0..50 {
            match bad.step(&v, 1e-3) {
                Ok(next) => v = next,
                Err(e) => {
                    err = Some(e);
                    break;
                }
            }
        }
        assert!(matches!(err, Some(Error::BlowUp { .. })));
        cfg.stepper.dt = 1e-3;
        assert!(Simulation::new(cfg).is_err());
    }
}
