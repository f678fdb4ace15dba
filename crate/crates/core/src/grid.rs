//! Uniform grids, their stencils and quadrature.
//!
//! Two layouts are supported:
//!
//! * **full**: a cell-centered tensor grid on `[-L, L]^d`, `d ∈ {1, 2}`, with
//!   `N` cells per axis (`h = 2L/N`), values stored row-major (`y` outer);
//! * **radial**: a vertex grid `r_i = i h` on `[0, L]` (`h = L/(N-1)`) for
//!   radially symmetric fields in any dimension `d`, discretized by finite
//!   volumes so that the axis node carries the limit `Δu → d u_rr`.
//!
//! Both use reflecting (zero-flux) boundaries. Vectors are stored in a
//! two-component frame: Cartesian components for full grids, and
//! `(radial, 0)` for radial grids.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::Spectral;

pub type Vec2 = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridMode {
    Full,
    Radial,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    mode: GridMode,
    dim: usize,
    half_width: f64,
    n: usize,
    h: f64,
    weights: Vec<f64>,
    /// Radial face areas `S_{d-1} r_{i+1/2}^{d-1}`, `n - 1` entries.
    faces: Vec<f64>,
    spectral: Option<Spectral>,
}

/// `Γ(k/2)` for positive integers `k`.
fn gamma_half(k: usize) -> f64 {
    let mut g = if k % 2 == 0 { 1.0 } else { std::f64::consts::PI.sqrt() };
    let mut x = if k % 2 == 0 { 1.0 } else { 0.5 };
    while x + 1e-12 < k as f64 / 2.0 {
        g *= x;
        x += 1.0;
    }
    g
}

/// Surface area of the unit sphere in `ℝ^d`, `2π^{d/2}/Γ(d/2)`.
pub fn unit_sphere_area(d: usize) -> f64 {
    2.0 * std::f64::consts::PI.powf(d as f64 / 2.0) / gamma_half(d)
}

impl Grid {
    pub fn full(dim: usize, half_width: f64, n: usize) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidArgument(format!(
                "full grids support d = 1 or 2, got {dim}"
            )));
        }
        if n < 4 || !(half_width > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "full grid needs N ≥ 4 and L > 0 (N = {n}, L = {half_width})"
            )));
        }
        let h = 2.0 * half_width / n as f64;
        let total = n.pow(dim as u32);
        Ok(Self {
            mode: GridMode::Full,
            dim,
            half_width,
            n,
            h,
            weights: vec![h.powi(dim as i32); total],
            faces: Vec::new(),
            spectral: (dim == 2).then(|| Spectral::new(n, h)),
        })
    }

    pub fn radial(dim: usize, half_width: f64, n: usize) -> Result<Self> {
        if dim < 1 || n < 4 || !(half_width > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "radial grid needs d ≥ 1, N ≥ 4, L > 0 (d = {dim}, N = {n}, L = {half_width})"
            )));
        }
        let h = half_width / (n - 1) as f64;
        let area = unit_sphere_area(dim);
        let ball = |r: f64| area / dim as f64 * r.powi(dim as i32);
        let weights = (0..n)
            .map(|i| {
                let r = i as f64 * h;
                let hi = (r + 0.5 * h).min(half_width);
                let lo = (r - 0.5 * h).max(0.0);
                ball(hi) - ball(lo)
            })
            .collect();
        let faces = (0..n - 1)
            .map(|i| area * ((i as f64 + 0.5) * h).powi(dim as i32 - 1))
            .collect();
        Ok(Self {
            mode: GridMode::Radial,
            dim,
            half_width,
            n,
            h,
            weights,
            faces,
            spectral: None,
        })
    }

    pub fn mode(&self) -> GridMode {
        self.mode
    }

    /// Physical dimension `d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Points per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Shape of the stored array (axes of the tensor layout).
    pub fn shape(&self) -> Vec<usize> {
        match self.mode {
            GridMode::Full => vec![self.n; self.dim],
            GridMode::Radial => vec![self.n],
        }
    }

    /// Quadrature weights; `Σ w_i f_i ≈ ∫ f dx` over the box (or ball).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.weights.iter().zip(f).map(|(w, v)| w * v).sum()
    }

    #[inline]
    fn coord(&self, i: usize) -> f64 {
        -self.half_width + (i as f64 + 0.5) * self.h
    }

    /// Physical coordinates of point `k` (for radial grids `(r, 0, …, 0) ∈ ℝ^d`).
    pub fn point(&self, k: usize) -> Vec<f64> {
        match (self.mode, self.dim) {
            (GridMode::Full, 1) => vec![self.coord(k)],
            (GridMode::Full, _) => vec![self.coord(k % self.n), self.coord(k / self.n)],
            (GridMode::Radial, d) => {
                let mut p = vec![0.0; d];
                p[0] = k as f64 * self.h;
                p
            }
        }
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|k| self.point(k)).collect()
    }

    /// Points on the outer boundary layer of the grid.
    pub fn boundary_indices(&self) -> Vec<usize> {
        let n = self.n;
        match (self.mode, self.dim) {
            (GridMode::Full, 1) => vec![0, n - 1],
            (GridMode::Full, _) => (0..self.len())
                .filter(|k| {
                    let (i, j) = (k % n, k / n);
                    i == 0 || j == 0 || i == n - 1 || j == n - 1
                })
                .collect(),
            (GridMode::Radial, _) => vec![n - 1],
        }
    }

    /// Discrete Laplacian with reflecting boundaries.
    pub fn laplacian(&self, u: &[f64], out: &mut [f64]) {
        let n = self.n;
        let ih2 = 1.0 / (self.h * self.h);
        match (self.mode, self.dim) {
            (GridMode::Full, 1) => {
                for i in 0..n {
                    let l = u[i.saturating_sub(1)];
                    let r = u[(i + 1).min(n - 1)];
                    out[i] = (l - 2.0 * u[i] + r) * ih2;
                }
            }
            (GridMode::Full, _) => {
                for j in 0..n {
                    let jd = j.saturating_sub(1) * n;
                    let ju = (j + 1).min(n - 1) * n;
                    for i in 0..n {
                        let k = j * n + i;
                        let l = u[j * n + i.saturating_sub(1)];
                        let r = u[j * n + (i + 1).min(n - 1)];
                        out[k] = (l + r + u[jd + i] + u[ju + i] - 4.0 * u[k]) * ih2;
                    }
                }
            }
            (GridMode::Radial, _) => {
                let ih = 1.0 / self.h;
                for i in 0..n {
                    let east = if i + 1 < n {
                        self.faces[i] * (u[i + 1] - u[i]) * ih
                    } else {
                        0.0
                    };
                    let west = if i > 0 {
                        self.faces[i - 1] * (u[i] - u[i - 1]) * ih
                    } else {
                        0.0
                    };
                    out[i] = (east - west) / self.weights[i];
                }
            }
        }
    }

    /// Central-difference gradient in the two-component frame.
    pub fn gradient(&self, u: &[f64], out: &mut [Vec2]) {
        let n = self.n;
        let i2h = 0.5 / self.h;
        match (self.mode, self.dim) {
            (GridMode::Full, 1) => {
                for i in 0..n {
                    let l = u[i.saturating_sub(1)];
                    let r = u[(i + 1).min(n - 1)];
                    out[i] = [(r - l) * i2h, 0.0];
                }
            }
            (GridMode::Full, _) => {
                for j in 0..n {
                    let jd = j.saturating_sub(1) * n;
                    let ju = (j + 1).min(n - 1) * n;
                    for i in 0..n {
                        let l = u[j * n + i.saturating_sub(1)];
                        let r = u[j * n + (i + 1).min(n - 1)];
                        out[j * n + i] = [(r - l) * i2h, (u[ju + i] - u[jd + i]) * i2h];
                    }
                }
            }
            (GridMode::Radial, _) => {
                out[0] = [0.0, 0.0];
                out[n - 1] = [0.0, 0.0];
                for i in 1..n - 1 {
                    out[i] = [(u[i + 1] - u[i - 1]) * i2h, 0.0];
                }
            }
        }
    }

    /// Squared gradient magnitude at each point as the volume-weighted mean of
    /// the squared face differences on either side.
    ///
    /// Its quadrature is exactly the discrete Dirichlet form whose gradient
    /// is `-Δ`, so the energy built from it dissipates consistently with
    /// the stencil. Reflecting faces contribute zero.
    pub fn gradient_norm_sq(&self, u: &[f64], out: &mut [f64]) {
        let n = self.n;
        let ih2 = 1.0 / (self.h * self.h);
        let sq = |a: f64, b: f64| (a - b) * (a - b);
        match (self.mode, self.dim) {
            (GridMode::Full, 1) => {
                for i in 0..n {
                    let l = if i > 0 { sq(u[i], u[i - 1]) } else { 0.0 };
                    let r = if i + 1 < n { sq(u[i + 1], u[i]) } else { 0.0 };
                    out[i] = 0.5 * (l + r) * ih2;
                }
            }
            (GridMode::Full, _) => {
                for j in 0..n {
                    for i in 0..n {
                        let k = j * n + i;
                        let mut s = 0.0;
                        if i > 0 {
                            s += sq(u[k], u[k - 1]);
                        }
                        if i + 1 < n {
                            s += sq(u[k + 1], u[k]);
                        }
                        if j > 0 {
                            s += sq(u[k], u[k - n]);
                        }
                        if j + 1 < n {
                            s += sq(u[k + n], u[k]);
                        }
                        out[k] = 0.5 * s * ih2;
                    }
                }
            }
            (GridMode::Radial, _) => {
                let h = self.h;
                for i in 0..n {
                    let west = if i > 0 { self.faces[i - 1] * sq(u[i], u[i - 1]) } else { 0.0 };
                    let east = if i + 1 < n { self.faces[i] * sq(u[i + 1], u[i]) } else { 0.0 };
                    out[i] = 0.5 * (west + east) / (h * self.weights[i]);
                }
            }
        }
    }

    /// Solve `(I - a Δ) x = b` for the grid Laplacian, `a > 0`.
    pub fn solve_shifted(&self, a: f64, b: &[f64], x: &mut [f64]) -> Result<()> {
        let n = self.n;
        match (self.mode, self.dim) {
            (GridMode::Full, 1) => {
                let off = -a / (self.h * self.h);
                let mut diag = vec![1.0 - 2.0 * off; n];
                diag[0] = 1.0 - off;
                diag[n - 1] = 1.0 - off;
                let lower = vec![off; n - 1];
                thomas(&lower, &diag, &lower, b, x);
                Ok(())
            }
            (GridMode::Full, _) => {
                match &self.spectral {
                    Some(s) => s.solve(a, b, x),
                    None => unreachable!("2D grids carry a spectral solver"),
                }
                Ok(())
            }
            (GridMode::Radial, _) => {
                let ih = 1.0 / self.h;
                let off: Vec<f64> = self.faces.iter().map(|f| -a * f * ih).collect();
                let diag: Vec<f64> = (0..n)
                    .map(|i| {
                        let e = if i + 1 < n { off[i] } else { 0.0 };
                        let w = if i > 0 { off[i - 1] } else { 0.0 };
                        self.weights[i] - e - w
                    })
                    .collect();
                let rhs: Vec<f64> = b.iter().zip(&self.weights).map(|(v, w)| v * w).collect();
                thomas(&off, &diag, &off, &rhs, x);
                Ok(())
            }
        }
    }
}

/// Tridiagonal solve; `lower[i]` couples rows `i+1` and `i`, `upper[i]` rows `i` and `i+1`.
fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64], x: &mut [f64]) {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = if n > 1 { upper[0] / diag[0] } else { 0.0 };
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i - 1] * c[i - 1];
        if i < n - 1 {
            c[i] = upper[i] / m;
        }
        d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / m;
    }
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
}

/// Values of a scalar quantity at every grid point.
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub grid: Arc<Grid>,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(grid.len(), values.len());
        Self { grid, values }
    }

    pub fn constant(grid: Arc<Grid>, value: f64) -> Self {
        let values = vec![value; grid.len()];
        Self { grid, values }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Number of values outside `[-1 - tol, 1 + tol]`.
    pub fn excursions(&self, tol: f64) -> usize {
        self.values.iter().filter(|v| v.abs() > 1.0 + tol).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn sphere_areas() {
        assert!((unit_sphere_area(1) - 2.0).abs() < 1e-14);
        assert!((unit_sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((unit_sphere_area(3) - 4.0 * PI).abs() < 1e-13);
        assert!((unit_sphere_area(4) - 2.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn radial_weights_sum_to_ball_volume() {
        for d in 1..=4 {
            let g = Grid::radial(d, 1.5, 101).unwrap();
            let vol: f64 = g.weights().iter().sum();
            let exact = unit_sphere_area(d) / d as f64 * 1.5f64.powi(d as i32);
            assert!((vol - exact).abs() < 1e-12 * exact, "d = {d}");
        }
    }

    #[test]
    fn radial_laplacian_of_r_squared() {
        // Δ r² = 2d everywhere, including the axis
        for d in 2..=3 {
            let g = Grid::radial(d, 1.0, 51).unwrap();
            let u: Vec<f64> = (0..g.len()).map(|k| g.point(k)[0].powi(2)).collect();
            let mut lap = vec![0.0; g.len()];
            g.laplacian(&u, &mut lap);
            for (i, v) in lap.iter().enumerate().take(g.len() - 1) {
                assert!((v - 2.0 * d as f64).abs() < 1e-9, "d = {d}, i = {i}: {v}");
            }
        }
    }

    #[test]
    fn full_laplacian_second_order() {
        let err = |n: usize| {
            let g = Grid::full(2, 1.0, n).unwrap();
            let u: Vec<f64> = (0..g.len())
                .map(|k| {
                    let p = g.point(k);
                    (PI * p[0]).cos() * (PI * p[1]).cos()
                })
                .collect();
            let mut lap = vec![0.0; g.len()];
            g.laplacian(&u, &mut lap);
            lap.iter()
                .zip(&u)
                .map(|(l, v)| (l + 2.0 * PI * PI * v).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(32) / err(64);
        assert!(ratio > 3.5 && ratio < 4.5, "{ratio}");
    }

    #[test]
    fn shifted_solves_invert_the_operator() {
        let grids = [
            Grid::full(1, 1.0, 64).unwrap(),
            Grid::full(2, 1.0, 32).unwrap(),
            Grid::radial(2, 1.0, 64).unwrap(),
            Grid::radial(3, 1.0, 64).unwrap(),
        ];
        for g in grids {
            let b: Vec<f64> = (0..g.len()).map(|k| ((k * 7919) % 13) as f64 / 13.0 - 0.5).collect();
            let mut x = vec![0.0; g.len()];
            let a = 0.3 * g.spacing().powi(2) * 10.0;
            g.solve_shifted(a, &b, &mut x).unwrap();
            let mut lap = vec![0.0; g.len()];
            g.laplacian(&x, &mut lap);
            for k in 0..g.len() {
                assert!((x[k] - a * lap[k] - b[k]).abs() < 1e-10, "{:?}", g.mode());
            }
        }
    }

    #[test]
    fn dirichlet_form_matches_laplacian() {
        // Σ w |∇u|² = -Σ w u Δu for the face-averaged gradient
        let grids = [
            Grid::full(1, 1.0, 40).unwrap(),
            Grid::full(2, 1.0, 24).unwrap(),
            Grid::radial(3, 1.0, 40).unwrap(),
        ];
        for g in grids {
            let u: Vec<f64> = (0..g.len())
                .map(|k| {
                    let p = g.point(k);
                    (2.0 * p[0]).sin() + p.iter().map(|x| x * x).sum::<f64>()
                })
                .collect();
            let mut sq = vec![0.0; g.len()];
            g.gradient_norm_sq(&u, &mut sq);
            let mut lap = vec![0.0; g.len()];
            g.laplacian(&u, &mut lap);
            let lhs = g.integrate(&sq);
            let rhs: f64 = -g.integrate(&u.iter().zip(&lap).map(|(a, b)| a * b).collect::<Vec<_>>());
            assert!((lhs - rhs).abs() < 1e-10 * lhs.abs(), "{:?}: {lhs} vs {rhs}", g.mode());
        }
    }

    #[test]
    fn face_averaged_gradient_is_consistent() {
        let g = Grid::radial(2, 1.0, 201).unwrap();
        let u: Vec<f64> = (0..g.len()).map(|k| g.point(k)[0].powi(2)).collect();
        let mut sq = vec![0.0; g.len()];
        g.gradient_norm_sq(&u, &mut sq);
        for k in 1..g.len() - 1 {
            let r = g.point(k)[0];
            assert!((sq[k] - 4.0 * r * r).abs() < 1e-3, "r = {r}");
        }
    }

    #[test]
    fn gradient_of_linear_function() {
        let g = Grid::full(2, 1.0, 16).unwrap();
        let u: Vec<f64> = (0..g.len()).map(|k| {
            let p = g.point(k);
            2.0 * p[0] - 3.0 * p[1]
        }).collect();
        let mut grad = vec![[0.0; 2]; g.len()];
        g.gradient(&u, &mut grad);
        // interior points only: reflecting boundaries flatten the edges
        for j in 1..15 {
            for i in 1..15 {
                let v = grad[j * 16 + i];
                assert!((v[0] - 2.0).abs() < 1e-12 && (v[1] + 3.0).abs() < 1e-12);
            }
        }
    }
}
