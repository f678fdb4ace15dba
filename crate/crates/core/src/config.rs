//! JSON run configurations and their defaults.
//!
//! A configuration file has optional sections `potential`, `trajectory`,
//! `cutoff`, `grid`, `stepper`, `diagnostics` and `sweep`, plus the
//! interface width `epsilon`. [`RunConfig::resolve`] fills every omitted
//! value and validates the result:
//!
//! | value | default |
//! |---|---|
//! | `potential` | `{"name": "standard"}` |
//! | `cutoff.r_c` | `0.5` for planes, `0.45 min_t R(t)` for spheres |
//! | `cutoff.c_quad` | `1` |
//! | `grid.mode` | `radial` for spheres, `full` for planes |
//! | `grid.h` | `ε/8` (ignored when `grid.n` is given) |
//! | `grid.half_width` | interface extent plus `max(r_c/2, 10ε)` |
//! | `stepper.kind` | `semi-implicit` |
//! | `stepper.dt` | `ε²/20` |
//! | `diagnostics.cadence` | `round(record_interval/Δt)` if given, else `10` |
//! | `diagnostics.s0` | `r_c/4` |
//!
//! ```
//! use aclab::config::RunConfig;
//!
//! let cfg: RunConfig = serde_json::from_str(r#"{
//!     "epsilon": 0.05,
//!     "trajectory": {"type": "plane", "normal": [1.0]},
//!     "stepper": {"t_end": 0.1}
//! }"#).unwrap();
//! let sim = cfg.resolve().unwrap();
//! assert_eq!(sim.grid.n, 160);
//! assert_eq!(sim.cutoff.r_c, 0.5);
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};
use crate::geometry::{Cutoff, Trajectory};
use crate::grid::GridMode;
use crate::potential::PotentialConfig;
use crate::solver::{DiagnosticsSpec, GridSpec, SimulationConfig, StepperKind, StepperSpec};

pub const DEFAULT_H_OVER_EPS: f64 = 8.0;
pub const DEFAULT_DT_OVER_EPS2: f64 = 0.05;
pub const DEFAULT_CADENCE: usize = 10;
pub const DEFAULT_PLANE_RC: f64 = 0.5;
pub const DEFAULT_SPHERE_RC_FRACTION: f64 = 0.45;
/// Box margin beyond the interface, in units of `ε`.
pub const BOX_MARGIN_EPS: f64 = 10.0;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_quad: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<GridMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepperSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<StepperKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cadence: Option<usize>,
    /// Target time between records; converted to a cadence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_interval: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub snapshots: Vec<f64>,
    #[serde(default)]
    pub identity: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s0: Option<f64>,
}

/// How the time step follows `ε` across a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum DtRule {
    /// `Δt = factor·ε²`.
    EpsSquared { factor: f64 },
    /// `Δt = factor·ε³`.
    EpsCubed { factor: f64 },
    Fixed { dt: f64 },
}

impl Default for DtRule {
    fn default() -> Self {
        Self::EpsSquared {
            factor: DEFAULT_DT_OVER_EPS2,
        }
    }
}

impl DtRule {
    pub fn dt(&self, eps: f64) -> f64 {
        match *self {
            Self::EpsSquared { factor } => factor * eps * eps,
            Self::EpsCubed { factor } => factor * eps * eps * eps,
            Self::Fixed { dt } => dt,
        }
    }
}

/// Closed intervals that fitted slopes must fall in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bands {
    #[serde(default = "Bands::err_l1_default")]
    pub err_l1: [f64; 2],
    #[serde(default = "Bands::rel_entropy_default")]
    pub rel_entropy: [f64; 2],
    #[serde(default = "Bands::initial_entropy_default")]
    pub initial_entropy: [f64; 2],
    /// Largest allowed ratio between fitted Gronwall constants.
    #[serde(default = "Bands::gronwall_spread_default")]
    pub gronwall_spread: f64,
}

impl Bands {
    fn err_l1_default() -> [f64; 2] {
        [0.8, 1.2]
    }
    fn rel_entropy_default() -> [f64; 2] {
        [1.7, 2.3]
    }
    fn initial_entropy_default() -> [f64; 2] {
        [1.8, 2.2]
    }
    fn gronwall_spread_default() -> f64 {
        2.0
    }
}

impl Default for Bands {
    fn default() -> Self {
        Self {
            err_l1: Self::err_l1_default(),
            rel_entropy: Self::rel_entropy_default(),
            initial_entropy: Self::initial_entropy_default(),
            gronwall_spread: Self::gronwall_spread_default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub epsilons: Vec<f64>,
    #[serde(default = "SweepSection::h_over_eps_default")]
    pub h_over_eps: f64,
    #[serde(default)]
    pub dt_rule: DtRule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_interval: Option<f64>,
    #[serde(default)]
    pub bands: Bands,
}

impl SweepSection {
    fn h_over_eps_default() -> f64 {
        DEFAULT_H_OVER_EPS
    }
}

/// A configuration document as written by users; every field is optional
/// except the trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub potential: PotentialConfig,
    pub trajectory: Trajectory,
    #[serde(default)]
    pub cutoff: CutoffSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub stepper: StepperSection,
    #[serde(default)]
    pub diagnostics: DiagnosticsSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

/// Default `r_c` for a trajectory observed up to `t_end`.
pub fn default_cutoff_radius(traj: &Trajectory, t_end: f64) -> f64 {
    match traj.radius(t_end.max(0.0)) {
        Some(r) => DEFAULT_SPHERE_RC_FRACTION * r,
        None => DEFAULT_PLANE_RC,
    }
}

/// Default box half-width: the interface extent plus `max(r_c/2, 10ε)`.
pub fn default_half_width(traj: &Trajectory, r_c: f64, eps: f64) -> f64 {
    let margin = (0.5 * r_c).max(BOX_MARGIN_EPS * eps);
    let extent = match traj {
        Trajectory::Plane { offset, .. } => offset.abs(),
        Trajectory::Sphere { r0, center, .. } => {
            r0 + center
                .as_ref()
                .map_or(0.0, |c| c.iter().fold(0.0f64, |m, x| m.max(x.abs())))
        }
    };
    extent + margin
}

/// Number of points giving spacing at most `h` over half-width `l`.
pub fn points_for_spacing(mode: GridMode, l: f64, h: f64) -> usize {
    match mode {
        GridMode::Full => (2.0 * l / h - 1e-9).ceil() as usize,
        GridMode::Radial => (l / h - 1e-9).ceil() as usize + 1,
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// The same document with `epsilon` replaced and every ε-dependent
    /// default left open.
    pub fn with_epsilon(&self, eps: f64) -> Self {
        let mut c = self.clone();
        c.epsilon = Some(eps);
        c
    }

    /// Materialize all defaults and validate.
    pub fn resolve(&self) -> Result<SimulationConfig> {
        let mut v = Vec::new();
        let Some(eps) = self.epsilon else {
            return Err(Error::InvalidConfig(vec![Violation::new(
                "epsilon",
                "required for a single run",
            )]));
        };
        let t_end = match self.stepper.t_end {
            Some(t) => t,
            None => {
                v.push(Violation::new("stepper.t_end", "required"));
                0.0
            }
        };
        let traj = &self.trajectory;
        let r_c = self
            .cutoff
            .r_c
            .unwrap_or_else(|| default_cutoff_radius(traj, t_end));
        let cutoff = Cutoff::new(r_c, self.cutoff.c_quad.unwrap_or(1.0));

        let g = &self.grid;
        let mode = g.mode.unwrap_or(match traj {
            Trajectory::Sphere { .. } => GridMode::Radial,
            Trajectory::Plane { .. } => GridMode::Full,
        });
        let half_width = g
            .half_width
            .unwrap_or_else(|| default_half_width(traj, r_c, eps));
        let n = match (g.n, g.h) {
            (Some(n), _) => n,
            (None, Some(h)) if h > 0.0 => points_for_spacing(mode, half_width, h),
            (None, Some(h)) => {
                v.push(Violation::new("grid.h", format!("must be positive, got {h}")));
                4
            }
            (None, None) => points_for_spacing(mode, half_width, eps / DEFAULT_H_OVER_EPS),
        };
        let grid = GridSpec {
            mode,
            dim: g.dim.unwrap_or(traj.dim()),
            half_width,
            n,
        };

        let stepper = StepperSpec {
            kind: self.stepper.kind.unwrap_or(StepperKind::SemiImplicit),
            dt: self.stepper.dt.unwrap_or(DEFAULT_DT_OVER_EPS2 * eps * eps),
            t_end,
        };
        let d = &self.diagnostics;
        let cadence = match (d.cadence, d.record_interval) {
            (Some(c), _) => c,
            (None, Some(dt_rec)) if dt_rec > 0.0 => {
                (dt_rec / stepper.effective_dt()).round().max(1.0) as usize
            }
            (None, Some(dt_rec)) => {
                v.push(Violation::new(
                    "diagnostics.record_interval",
                    format!("must be positive, got {dt_rec}"),
                ));
                DEFAULT_CADENCE
            }
            (None, None) => DEFAULT_CADENCE,
        };
        let diagnostics = DiagnosticsSpec {
            cadence,
            snapshots: d.snapshots.clone(),
            identity: d.identity,
            s0: d.s0.unwrap_or(0.25 * r_c),
        };

        let cfg = SimulationConfig {
            epsilon: eps,
            potential: self.potential.clone(),
            trajectory: traj.clone(),
            cutoff,
            grid,
            stepper,
            diagnostics,
        };
        v.extend(cfg.validate());
        if v.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::InvalidConfig(v))
        }
    }
}
