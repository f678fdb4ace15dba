//! Functionals evaluated on a field snapshot.
//!
//! The direction `n_ε` comes from central differences; the magnitude `|∇u|`
//! is the face-averaged one of [`Grid::gradient_norm_sq`], whose quadrature
//! is the Dirichlet form of the Laplacian stencil, so the discrete energy
//! dissipates consistently with the scheme. `∇ψ` is formed by the chain
//! rule `√(2W(u)) |∇u| n_ε`, so `|∇ψ| = √(2W)|∇u|` holds pointwise and the
//! algebraic decompositions behind the coercivity estimates are exact on
//! the grid:
//!
//! ```text
//! E[u|I] = ∫ ½(√ε|∇u| - √(2W)/√ε)² + ∫ (1 - ξ·n_ε)|∇ψ|
//! ```
//!
//! Every integral is the grid quadrature [`Grid::integrate`].

use serde::Serialize;

use crate::error::Result;
use crate::geometry::{point_fields, Cutoff, Trajectory};
use crate::grid::{Grid, GridMode, Vec2};
use crate::potential::Potential;

/// Relative gradient floor: below `floor·(max|∇u| + 1)` the normal falls back.
pub const GRADIENT_FLOOR: f64 = 1e-12;

/// Values beyond `1 + CLAMP_TOL` in magnitude count as excursions.
pub const CLAMP_TOL: f64 = 1e-12;

/// Slack factor of the coercivity checks.
pub const COERCIVITY_SLACK: f64 = 1.1;

/// Absolute allowance in the coercivity checks for snapshots with `E ≈ 0`.
pub const COERCIVITY_FLOOR: f64 = 1e-12;

#[inline]
fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
fn norm2(a: Vec2) -> f64 {
    dot(a, a)
}

/// `bᵀ M a` for a row-major 2×2 `M` with `M[i][j] = ∂_i F_j`, i.e. `∇F : a ⊗ b`.
#[inline]
fn contract(m: &[f64; 4], a: Vec2, b: Vec2) -> f64 {
    a[0] * (m[0] * b[0] + m[1] * b[1]) + a[1] * (m[2] * b[0] + m[3] * b[1])
}

/// The smooth truncation `τ` of the identity used in the weighted error.
///
/// `τ(s) = s` on `|s| ≤ 1/2`, `τ(s) = sign(s)` on `|s| ≥ 1`; in between,
/// with `z = 2|s| - 1`, `|τ| = 1/2 + z/2 + 2z³ - 7z⁴/2 + 3z⁵/2`, whose
/// derivative `(1 - z)²(15z²/2 + z + 1/2)` is positive. The joins are C².
pub fn tau(s: f64) -> f64 {
    let a = s.abs();
    if a <= 0.5 {
        s
    } else if a >= 1.0 {
        s.signum()
    } else {
        let z = 2.0 * a - 1.0;
        let q = 0.5 + z * (0.5 + z * z * (2.0 + z * (-3.5 + 1.5 * z)));
        q.copysign(s)
    }
}

/// Pointwise quantities derived from `u` alone.
#[derive(Debug, Clone)]
pub struct DerivedFields {
    /// Central-difference gradient; only its direction is used.
    pub grad: Vec<Vec2>,
    /// Face-averaged `|∇u|`.
    pub grad_norm: Vec<f64>,
    /// `n_ε = ∇u/|∇u|`, or the fallback where the gradient is below the floor.
    pub normal: Vec<Vec2>,
    pub psi: Vec<f64>,
    /// `|∇ψ_ε| = √(2W(u))|∇u|`.
    pub grad_psi_norm: Vec<f64>,
    pub laplacian: Vec<f64>,
    /// `εΔu - W'(u)/ε`.
    pub chemical: Vec<f64>,
    /// `H_ε = -(εΔu - W'(u)/ε) n_ε`.
    pub curvature: Vec<Vec2>,
    /// Points outside `[-1 - CLAMP_TOL, 1 + CLAMP_TOL]`.
    pub clamped: usize,
}

impl DerivedFields {
    pub fn new(grid: &Grid, p: &Potential, eps: f64, u: &[f64]) -> Self {
        Self::with_fallback(grid, p, eps, u, [1.0, 0.0])
    }

    /// As [`DerivedFields::new`] with an explicit unit fallback normal.
    pub fn with_fallback(grid: &Grid, p: &Potential, eps: f64, u: &[f64], fallback: Vec2) -> Self {
        let len = grid.len();
        let mut grad = vec![[0.0; 2]; len];
        grid.gradient(u, &mut grad);
        let mut laplacian = vec![0.0; len];
        grid.laplacian(u, &mut laplacian);

        let mut grad_norm = vec![0.0; len];
        grid.gradient_norm_sq(u, &mut grad_norm);
        grad_norm.iter_mut().for_each(|v| *v = v.sqrt());
        let central: Vec<f64> = grad.iter().map(|g| norm2(*g).sqrt()).collect();
        let floor = GRADIENT_FLOOR * (central.iter().cloned().fold(0.0, f64::max) + 1.0);
        let normal: Vec<Vec2> = grad
            .iter()
            .zip(&central)
            .map(|(g, &n)| if n < floor { fallback } else { [g[0] / n, g[1] / n] })
            .collect();
        let psi = u.iter().map(|&v| p.psi(v)).collect();
        let grad_psi_norm = u
            .iter()
            .zip(&grad_norm)
            .map(|(&v, &n)| p.sqrt_2w(v) * n)
            .collect();
        let chemical: Vec<f64> = u
            .iter()
            .zip(&laplacian)
            .map(|(&v, &l)| eps * l - p.dw(v) / eps)
            .collect();
        let curvature = chemical
            .iter()
            .zip(&normal)
            .map(|(&m, n)| [-m * n[0], -m * n[1]])
            .collect();
        let clamped = u.iter().filter(|v| v.abs() > 1.0 + CLAMP_TOL).count();
        Self {
            grad,
            grad_norm,
            normal,
            psi,
            grad_psi_norm,
            laplacian,
            chemical,
            curvature,
            clamped,
        }
    }
}

/// Geometric fields at one grid point, in the grid's two-component frame.
///
/// On radial grids only the radial components are stored; every vector in
/// play is radial, so the `rr` entry is the only one any contraction sees.
/// Divergences are always the full `d`-dimensional ones.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FrameGeometry {
    pub dist: f64,
    pub chi: f64,
    pub xi: Vec2,
    pub grad_xi: [f64; 4],
    pub div_xi: f64,
    pub curvature: Vec2,
    pub grad_curvature: [f64; 4],
    pub div_curvature: f64,
    pub dt_xi: Vec2,
}

/// Evaluate the exact interface fields at every grid point at time `t`.
pub fn frame_geometry(
    grid: &Grid,
    traj: &Trajectory,
    cutoff: &Cutoff,
    t: f64,
) -> Result<Vec<FrameGeometry>> {
    let d = traj.dim();
    let keep = match grid.mode() {
        GridMode::Full => d.min(2),
        GridMode::Radial => 1,
    };
    let mut out = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        let x = grid.point(k);
        let f = point_fields(traj, cutoff, &x, t)?;
        let mut g = FrameGeometry {
            dist: f.dist,
            chi: if f.dist >= 0.0 { 1.0 } else { -1.0 },
            div_xi: f.div_xi,
            div_curvature: f.div_curvature,
            ..Default::default()
        };
        for i in 0..keep {
            g.xi[i] = f.xi[i];
            g.curvature[i] = f.curvature[i];
            g.dt_xi[i] = f.dt_xi[i];
            for j in 0..keep {
                g.grad_xi[i * 2 + j] = f.grad_xi[i * d + j];
                g.grad_curvature[i * 2 + j] = f.grad_curvature[i * d + j];
            }
        }
        out.push(g);
    }
    Ok(out)
}

/// The eight integral groups of the relative-entropy evolution formula, in order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct IdentityTerms {
    pub groups: [f64; 8],
}

impl IdentityTerms {
    pub fn total(&self) -> f64 {
        self.groups.iter().sum()
    }
}

/// One diagnostic record.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EntropyBreakdown {
    pub t: f64,
    pub gl_energy: f64,
    pub dissipation: f64,
    pub rel_entropy: f64,
    pub equipartition_defect: f64,
    pub misalignment: f64,
    pub tilt_excess: f64,
    pub dist_weighted_energy: f64,
    pub defect_sq_curvature: f64,
    pub defect_sq_velocity: f64,
    pub err_l1: f64,
    pub err_weighted: f64,
    pub identity_rhs: Option<f64>,
    pub identity_residual: Option<f64>,
    pub clamped: usize,
}

pub const CSV_HEADER: [&str; 13] = [
    "t",
    "gl_energy",
    "dissipation",
    "rel_entropy",
    "equipartition_defect",
    "misalignment",
    "tilt_excess",
    "dist_weighted_energy",
    "defect_sq_curvature",
    "defect_sq_velocity",
    "err_L1",
    "err_weighted",
    "identity_residual",
];

impl EntropyBreakdown {
    /// CSV row in [`CSV_HEADER`] order; an unavailable residual is an empty field.
    pub fn csv_row(&self) -> String {
        let cols = [
            self.t,
            self.gl_energy,
            self.dissipation,
            self.rel_entropy,
            self.equipartition_defect,
            self.misalignment,
            self.tilt_excess,
            self.dist_weighted_energy,
            self.defect_sq_curvature,
            self.defect_sq_velocity,
            self.err_l1,
            self.err_weighted,
        ];
        let mut row: Vec<String> = cols.iter().map(|v| format!("{v:e}")).collect();
        row.push(self.identity_residual.map(|v| format!("{v:e}")).unwrap_or_default());
        row.join(",")
    }
}

/// Everything needed to evaluate the functionals at one time.
#[derive(Debug, Clone, Copy)]
pub struct Evaluator<'a> {
    pub grid: &'a Grid,
    pub potential: &'a Potential,
    pub eps: f64,
    pub trajectory: &'a Trajectory,
    pub cutoff: &'a Cutoff,
    /// Length scale of the weighted error; the default is `r_c/4`.
    pub s0: f64,
}

impl<'a> Evaluator<'a> {
    pub fn new(
        grid: &'a Grid,
        potential: &'a Potential,
        eps: f64,
        trajectory: &'a Trajectory,
        cutoff: &'a Cutoff,
    ) -> Self {
        Self {
            grid,
            potential,
            eps,
            trajectory,
            cutoff,
            s0: 0.25 * cutoff.r_c,
        }
    }

    /// Fill every field of the breakdown except the identity residual.
    pub fn evaluate(&self, u: &[f64], t: f64, with_identity: bool) -> Result<EntropyBreakdown> {
        let fields = DerivedFields::new(self.grid, self.potential, self.eps, u);
        let geometry = frame_geometry(self.grid, self.trajectory, self.cutoff, t)?;
        let mut b = self.breakdown(u, &fields, &geometry);
        b.t = t;
        (b.err_l1, b.err_weighted) = self.interface_errors(u, t);
        if with_identity {
            b.identity_rhs = Some(self.identity_terms(u, &fields, &geometry).total());
        }
        Ok(b)
    }

    /// Every integral except the interface errors, which need the exact
    /// interface inside cut cells; see [`Evaluator::interface_errors`].
    pub fn breakdown(
        &self,
        u: &[f64],
        f: &DerivedFields,
        geo: &[FrameGeometry],
    ) -> EntropyBreakdown {
        let eps = self.eps;
        let p = self.potential;
        let sqrt_eps = eps.sqrt();
        let mut b = EntropyBreakdown {
            clamped: f.clamped,
            ..Default::default()
        };
        for (k, &w) in self.grid.weights().iter().enumerate() {
            let g = &geo[k];
            let gn = f.grad_norm[k];
            let n = f.normal[k];
            let s2w = p.sqrt_2w(u[k]);
            let pot = p.w(u[k].clamp(-1.0, 1.0));
            let gpsi = f.grad_psi_norm[k];
            let density = 0.5 * eps * gn * gn + pot / eps;
            let mis = norm2(sub(n, g.xi));
            let equip = (sqrt_eps * gn - s2w / sqrt_eps).powi(2);
            let h_eps = f.curvature[k];
            let curv = sub(h_eps, [g.curvature[0] * eps * gn, g.curvature[1] * eps * gn]);
            let vel = dot(n, h_eps) + g.div_xi * s2w;

            b.gl_energy += w * density;
            b.dissipation += w * f.chemical[k] * f.chemical[k] / eps;
            b.rel_entropy += w * (density - gpsi * dot(g.xi, n));
            b.equipartition_defect += w * equip;
            b.misalignment += w * mis * gpsi;
            b.tilt_excess += w * mis * eps * gn * gn;
            b.dist_weighted_energy += w * (g.dist * g.dist).min(1.0) * density;
            b.defect_sq_curvature += w * norm2(curv) / (4.0 * eps);
            b.defect_sq_velocity += w * vel * vel / (4.0 * eps);
        }
        b
    }

    /// Quadrature of the eight groups on the right-hand side of the
    /// relative-entropy evolution formula.
    pub fn identity_terms(
        &self,
        u: &[f64],
        f: &DerivedFields,
        geo: &[FrameGeometry],
    ) -> IdentityTerms {
        let eps = self.eps;
        let p = self.potential;
        let mut s = [0.0; 8];
        for (k, &w) in self.grid.weights().iter().enumerate() {
            let g = &geo[k];
            let gn = f.grad_norm[k];
            let n = f.normal[k];
            let s2w = p.sqrt_2w(u[k]);
            let pot = p.w(u[k].clamp(-1.0, 1.0));
            let gpsi = f.grad_psi_norm[k];
            let h_eps = f.curvature[k];
            let h = g.curvature;
            let m = sub(n, g.xi);

            let curv = sub(h_eps, [h[0] * eps * gn, h[1] * eps * gn]);
            let vel = dot(n, h_eps) + g.div_xi * s2w;
            s[0] -= w * (norm2(curv) + vel * vel) / (2.0 * eps);

            s[1] += w * (norm2(h) * 0.5 * eps * gn * gn
                + g.div_xi * g.div_xi * pot / eps
                + dot(h, n) * g.div_xi * gpsi);

            s[2] += w * g.div_curvature * (0.5 * eps * gn * gn + pot / eps - gpsi);
            s[3] -= w * contract(&g.grad_curvature, n, n) * (eps * gn * gn - gpsi);
            s[4] -= w * contract(&g.grad_curvature, m, m) * gpsi;
            s[5] += w * g.div_curvature * (1.0 - dot(g.xi, n)) * gpsi;

            // ((H·∇)ξ)_j = Σ_i H_i ∂_i ξ_j and ((∇H)ᵀξ)_j = Σ_i ∂_j H_i ξ_i
            let gx = &g.grad_xi;
            let gh = &g.grad_curvature;
            let advect = [
                h[0] * gx[0] + h[1] * gx[2],
                h[0] * gx[1] + h[1] * gx[3],
            ];
            let stretch = [
                gh[0] * g.xi[0] + gh[1] * g.xi[1],
                gh[2] * g.xi[0] + gh[3] * g.xi[1],
            ];
            let transport = [
                g.dt_xi[0] + advect[0] + stretch[0],
                g.dt_xi[1] + advect[1] + stretch[1],
            ];
            s[6] -= w * gpsi * dot(m, transport);
            let partial = [g.dt_xi[0] + advect[0], g.dt_xi[1] + advect[1]];
            s[7] -= w * gpsi * dot(g.xi, partial);
        }
        IdentityTerms { groups: s }
    }

    /// `‖ψ(u) - χ‖_{L¹}` and the `τ`-weighted error.
    ///
    /// `χ` jumps across the interface, so cells within `h` of it are
    /// integrated on a [`CUT_CELL_SAMPLES`] subgrid with `ψ` reconstructed
    /// linearly from central differences; elsewhere the midpoint rule is used.
    pub fn interface_errors(&self, u: &[f64], t: f64) -> (f64, f64) {
        let grid = self.grid;
        let h = grid.spacing();
        let psi: Vec<f64> = u.iter().map(|&v| self.potential.psi(v)).collect();
        let mut dpsi = vec![[0.0; 2]; grid.len()];
        grid.gradient(&psi, &mut dpsi);
        let integrand = |x: &[f64], p: f64| {
            let dist = self.trajectory.signed_distance(x, t);
            let chi = if dist >= 0.0 { 1.0 } else { -1.0 };
            ((p - chi).abs(), (chi - p) * tau(dist / self.s0))
        };
        let mut l1 = 0.0;
        let mut weighted = 0.0;
        for (k, &w) in grid.weights().iter().enumerate() {
            let x = grid.point(k);
            let dist = self.trajectory.signed_distance(&x, t);
            if dist.abs() >= h {
                let (a, b) = integrand(&x, psi[k]);
                l1 += w * a;
                weighted += w * b;
                continue;
            }
            let (a, b) = cut_cell(grid, &x, |y, off| {
                integrand(y, psi[k] + dot(dpsi[k], off))
            });
            l1 += w * a;
            weighted += w * b;
        }
        (l1, weighted)
    }
}

/// Subsamples per axis in cut cells.
pub const CUT_CELL_SAMPLES: usize = 32;

/// Weighted mean of `f` over the control volume centred at `x`; `f` receives
/// the sample position and its offset from the point in the grid frame.
fn cut_cell(
    grid: &Grid,
    x: &[f64],
    f: impl Fn(&[f64], Vec2) -> (f64, f64),
) -> (f64, f64) {
    let h = grid.spacing();
    let s = CUT_CELL_SAMPLES;
    let frac = |j: usize| (j as f64 + 0.5) / s as f64 - 0.5;
    let mut acc = (0.0, 0.0);
    let mut total = 0.0;
    let mut y = x.to_vec();
    let mut add = |y: &[f64], off: Vec2, w: f64| {
        let (a, b) = f(y, off);
        acc.0 += w * a;
        acc.1 += w * b;
        total += w;
    };
    match (grid.mode(), grid.dim()) {
        (GridMode::Full, 1) => {
            for j in 0..s {
                let o = frac(j) * h;
                y[0] = x[0] + o;
                add(&y, [o, 0.0], 1.0);
            }
        }
        (GridMode::Full, _) => {
            for jy in 0..s {
                for jx in 0..s {
                    let off = [frac(jx) * h, frac(jy) * h];
                    y[0] = x[0] + off[0];
                    y[1] = x[1] + off[1];
                    add(&y, off, 1.0);
                }
            }
        }
        (GridMode::Radial, d) => {
            let lo = (x[0] - 0.5 * h).max(0.0);
            let hi = (x[0] + 0.5 * h).min(grid.half_width());
            let dr = (hi - lo) / s as f64;
            for j in 0..s {
                let r = lo + (j as f64 + 0.5) * dr;
                y[0] = r;
                add(&y, [r - x[0], 0.0], r.powi(d as i32 - 1));
            }
        }
    }
    (acc.0 / total, acc.1 / total)
}

/// `∫ ε|∇u|²/2 + W(u)/ε`.
pub fn gl_energy(grid: &Grid, p: &Potential, eps: f64, u: &[f64]) -> f64 {
    let mut sq = vec![0.0; grid.len()];
    grid.gradient_norm_sq(u, &mut sq);
    let density: Vec<f64> = sq
        .iter()
        .zip(u)
        .map(|(g, &v)| 0.5 * eps * g + p.w(v.clamp(-1.0, 1.0)) / eps)
        .collect();
    grid.integrate(&density)
}

/// `∫ ε⁻¹ (εΔu - W'(u)/ε)²`.
pub fn dissipation(grid: &Grid, p: &Potential, eps: f64, u: &[f64]) -> f64 {
    let mut lap = vec![0.0; grid.len()];
    grid.laplacian(u, &mut lap);
    let density: Vec<f64> = lap
        .iter()
        .zip(u)
        .map(|(&l, &v)| (eps * l - p.dw(v) / eps).powi(2) / eps)
        .collect();
    grid.integrate(&density)
}

/// Evaluate the relative entropy and every coercivity integral at time `t`.
pub fn relative_entropy(
    grid: &Grid,
    p: &Potential,
    eps: f64,
    u: &[f64],
    traj: &Trajectory,
    cutoff: &Cutoff,
    t: f64,
) -> Result<EntropyBreakdown> {
    Evaluator::new(grid, p, eps, traj, cutoff).evaluate(u, t, false)
}

/// `(‖ψ_ε - χ‖_{L¹}, ∫(χ - ψ_ε) τ(dist±/s₀))`.
pub fn interface_errors(
    grid: &Grid,
    p: &Potential,
    u: &[f64],
    traj: &Trajectory,
    t: f64,
    s0: f64,
) -> (f64, f64) {
    let cutoff = Cutoff::new(4.0 * s0, 1.0);
    let mut ev = Evaluator::new(grid, p, 1.0, traj, &cutoff);
    ev.s0 = s0;
    ev.interface_errors(u, t)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoercivityCheck {
    pub name: &'static str,
    pub lhs: f64,
    pub bound: f64,
    /// `lhs / bound`; above 1 is a violation.
    pub ratio: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoercivityReport {
    pub t: f64,
    pub checks: Vec<CoercivityCheck>,
}

impl CoercivityReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn violations(&self) -> impl Iterator<Item = &CoercivityCheck> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

/// The four coercivity inequalities with slack [`COERCIVITY_SLACK`].
///
/// The constant of the distance-weighted estimate comes from
/// [`Cutoff::distance_control_constant`].
pub fn coercivity_check(b: &EntropyBreakdown, cutoff: &Cutoff) -> CoercivityReport {
    let e = b.rel_entropy;
    let check = |name, lhs: f64, factor: f64| {
        let bound = factor * e * COERCIVITY_SLACK + COERCIVITY_FLOOR;
        CoercivityCheck {
            name,
            lhs,
            bound,
            ratio: lhs / bound,
            pass: lhs <= bound,
        }
    };
    CoercivityReport {
        t: b.t,
        checks: vec![
            check("equipartition_defect", b.equipartition_defect, 2.0),
            check("misalignment", b.misalignment, 2.0),
            check("tilt_excess", b.tilt_excess, 12.0),
            check(
                "dist_weighted_energy",
                b.dist_weighted_energy,
                cutoff.distance_control_constant(),
            ),
        ],
    }
}

/// `|(E_{i+1} - E_i)/(t_{i+1} - t_i) + (D_i + D_{i+1})/2| / max(D, 1)` between
/// consecutive records, with `D` the trapezoidal mean.
pub fn dissipation_residuals(series: &[EntropyBreakdown]) -> Vec<f64> {
    series
        .windows(2)
        .map(|w| {
            let rate = (w[1].gl_energy - w[0].gl_energy) / (w[1].t - w[0].t);
            let d = 0.5 * (w[0].dissipation + w[1].dissipation);
            (rate + d).abs() / d.max(1.0)
        })
        .collect()
}

/// Fill `identity_residual` from centered differences of neighbouring records.
pub fn fill_identity_residuals(series: &mut [EntropyBreakdown]) {
    for i in 1..series.len().saturating_sub(1) {
        let Some(rhs) = series[i].identity_rhs else {
            continue;
        };
        let rate = (series[i + 1].rel_entropy - series[i - 1].rel_entropy)
            / (series[i + 1].t - series[i - 1].t);
        series[i].identity_residual = Some((rate - rhs).abs());
    }
}

/// Smallest pointwise margin of `2|∇ψ| + (√ε|∇u| - √(2W)/√ε)² - ε|∇u|²`,
/// which the Young absorption step requires to be nonnegative.
pub fn young_absorption_margin(p: &Potential, eps: f64, u: &[f64], f: &DerivedFields) -> f64 {
    let sqrt_eps = eps.sqrt();
    u.iter()
        .enumerate()
        .map(|(k, &v)| {
            let gn = f.grad_norm[k];
            let defect = (sqrt_eps * gn - p.sqrt_2w(v) / sqrt_eps).powi(2);
            2.0 * f.grad_psi_norm[k] + defect - eps * gn * gn
        })
        .fold(f64::INFINITY, f64::min)
}
