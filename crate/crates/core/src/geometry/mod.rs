//! Exact mean-curvature-flow trajectories and the fields built around them.
//!
//! The calibration field `ξ = η(dist±) n_I(P_I x)` extends the inner unit
//! normal of the exact interface into a tube, and the extended curvature
//! `H_I(x) = H_I(P_I x) η̃(dist±)` does the same for the mean curvature
//! vector. Everything here is evaluated in closed form: the only derivatives
//! needed are those of the signed distance (normal and Hessian) and of the
//! cutoffs.

mod cutoff;
mod trajectory;

pub use cutoff::Cutoff;
pub use trajectory::Trajectory;

use crate::error::{Error, Result};

/// Every geometric field needed at one point, in the coordinates of the point.
///
/// Matrices are row-major with `grad[i * d + j] = ∂_i F_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointFields {
    pub dist: f64,
    pub xi: Vec<f64>,
    pub grad_xi: Vec<f64>,
    pub div_xi: f64,
    pub curvature: Vec<f64>,
    pub grad_curvature: Vec<f64>,
    pub div_curvature: f64,
    pub dt_xi: Vec<f64>,
}

impl PointFields {
    fn zero(dist: f64, d: usize) -> Self {
        Self {
            dist,
            xi: vec![0.0; d],
            grad_xi: vec![0.0; d * d],
            div_xi: 0.0,
            curvature: vec![0.0; d],
            grad_curvature: vec![0.0; d * d],
            div_curvature: 0.0,
            dt_xi: vec![0.0; d],
        }
    }
}

/// Evaluate `ξ`, `H_I` and their derivatives at `x`.
///
/// Outside the `r_c/2` tube every field vanishes; in particular the sphere
/// center is admissible as long as it lies outside the tube.
pub fn point_fields(traj: &Trajectory, cutoff: &Cutoff, x: &[f64], t: f64) -> Result<PointFields> {
    let d = traj.dim();
    let dist = traj.signed_distance(x, t);
    let (eta, deta) = cutoff.eta(dist);
    let (tilde, dtilde) = cutoff.tilde(dist);
    if eta == 0.0 && deta == 0.0 && tilde == 0.0 && dtilde == 0.0 {
        return Ok(PointFields::zero(dist, d));
    }
    let n = traj.inner_normal(x).map_err(|_| {
        Error::Geometry(format!(
            "projection undefined at {x:?} inside the cutoff tube (dist = {dist})"
        ))
    })?;
    let hess = traj.distance_hessian(x)?;
    let lap: f64 = (0..d).map(|i| hess[i * d + i]).sum();
    let kappa = traj.curvature(t);

    let mut grad_xi = vec![0.0; d * d];
    let mut grad_h = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            let nn = n[i] * n[j];
            grad_xi[i * d + j] = deta * nn + eta * hess[i * d + j];
            grad_h[i * d + j] = kappa * (dtilde * nn + tilde * hess[i * d + j]);
        }
    }
    let rate = traj.distance_rate(t);
    Ok(PointFields {
        dist,
        xi: n.iter().map(|v| eta * v).collect(),
        grad_xi,
        div_xi: deta + eta * lap,
        curvature: n.iter().map(|v| kappa * tilde * v).collect(),
        grad_curvature: grad_h,
        div_curvature: kappa * (dtilde + tilde * lap),
        // the normal field of a plane or sphere is stationary at fixed x
        dt_xi: n.iter().map(|v| deta * rate * v).collect(),
    })
}

/// `ξ(x, t) = η(dist±) n_I(P_I x)`.
pub fn xi(traj: &Trajectory, cutoff: &Cutoff, x: &[f64], t: f64) -> Result<Vec<f64>> {
    Ok(point_fields(traj, cutoff, x, t)?.xi)
}

/// `H_I(x, t) = H_I(P_I x) η̃(dist±)`.
pub fn extended_curvature(traj: &Trajectory, cutoff: &Cutoff, x: &[f64], t: f64) -> Result<Vec<f64>> {
    Ok(point_fields(traj, cutoff, x, t)?.curvature)
}

/// Central-difference approximation of `∇H_I`, layout as in [`PointFields`].
///
/// Only needed for trajectories without a closed-form Hessian; here it
/// serves to cross-check the analytic path.
pub fn grad_extended_curvature_fd(
    traj: &Trajectory,
    cutoff: &Cutoff,
    x: &[f64],
    t: f64,
    step: f64,
) -> Result<Vec<f64>> {
    let d = traj.dim();
    let mut grad = vec![0.0; d * d];
    let mut xp = x.to_vec();
    for i in 0..d {
        xp[i] = x[i] + step;
        let plus = extended_curvature(traj, cutoff, &xp, t)?;
        xp[i] = x[i] - step;
        let minus = extended_curvature(traj, cutoff, &xp, t)?;
        xp[i] = x[i];
        for j in 0..d {
            grad[i * d + j] = (plus[j] - minus[j]) / (2.0 * step);
        }
    }
    Ok(grad)
}

/// Pointwise residuals of the three ξ evolution laws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiResiduals {
    pub dist: f64,
    /// `|∂_t ξ + (H_I·∇)ξ + (∇H_I)ᵀξ|`
    pub transport: f64,
    /// `|∂_t |ξ|² + (H_I·∇)|ξ|²|`
    pub length: f64,
    /// `|-∇·ξ - H_I·ξ|`
    pub curvature: f64,
}

/// Residuals at `x`; `∂_t` is a central difference with step `dt`.
pub fn xi_residuals_at(
    traj: &Trajectory,
    cutoff: &Cutoff,
    x: &[f64],
    t: f64,
    dt: f64,
) -> Result<XiResiduals> {
    let d = traj.dim();
    let f = point_fields(traj, cutoff, x, t)?;
    let plus = xi(traj, cutoff, x, t + dt)?;
    let minus = xi(traj, cutoff, x, t - dt)?;
    let sq = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>();

    let mut transport = 0.0;
    let mut advect_len = 0.0;
    for j in 0..d {
        let dt_xi = (plus[j] - minus[j]) / (2.0 * dt);
        let advect: f64 = (0..d).map(|i| f.curvature[i] * f.grad_xi[i * d + j]).sum();
        let stretch: f64 = (0..d).map(|i| f.grad_curvature[j * d + i] * f.xi[i]).sum();
        let r = dt_xi + advect + stretch;
        transport += r * r;
        advect_len += 2.0 * f.xi[j] * advect;
    }
    let dt_len = (sq(&plus) - sq(&minus)) / (2.0 * dt);
    let h_dot_xi: f64 = f.curvature.iter().zip(&f.xi).map(|(a, b)| a * b).sum();
    Ok(XiResiduals {
        dist: f.dist,
        transport: transport.sqrt(),
        length: (dt_len + advect_len).abs(),
        curvature: (-f.div_xi - h_dot_xi).abs(),
    })
}

/// Suprema of the ξ residuals, scaled by `dist` (transport, curvature) and
/// `dist²` (length), over one tube.
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize)]
pub struct TubeSup {
    pub transport_over_dist: f64,
    pub length_over_dist2: f64,
    pub curvature_over_dist: f64,
    pub points: usize,
}

impl TubeSup {
    fn absorb(&mut self, r: &XiResiduals) {
        let a = r.dist.abs();
        self.transport_over_dist = self.transport_over_dist.max(r.transport / a);
        self.length_over_dist2 = self.length_over_dist2.max(r.length / (a * a));
        self.curvature_over_dist = self.curvature_over_dist.max(r.curvature / a);
        self.points += 1;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize)]
pub struct XiResidualReport {
    /// `dist ≤ r_c/4`, where `η̃ ≡ 1`.
    pub quarter_tube: TubeSup,
    /// `dist ≤ r_c/2`, the full support of `ξ`.
    pub half_tube: TubeSup,
    /// Unscaled sup of each residual over the half tube.
    pub max_transport: f64,
    pub max_length: f64,
    pub max_curvature: f64,
}

/// Evaluate the ξ residuals over a point cloud. Points closer than `min_dist`
/// to the interface are skipped in the scaled suprema (the ratios are 0/0 there).
pub fn xi_pde_residuals<'a, I>(
    traj: &Trajectory,
    cutoff: &Cutoff,
    points: I,
    t: f64,
    dt: f64,
    min_dist: f64,
) -> Result<XiResidualReport>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut report = XiResidualReport::default();
    for x in points {
        let dist = traj.signed_distance(x, t).abs();
        if dist > 0.5 * cutoff.r_c {
            continue;
        }
        let r = xi_residuals_at(traj, cutoff, x, t, dt)?;
        report.max_transport = report.max_transport.max(r.transport);
        report.max_length = report.max_length.max(r.length);
        report.max_curvature = report.max_curvature.max(r.curvature);
        if dist < min_dist {
            continue;
        }
        report.half_tube.absorb(&r);
        if dist <= 0.25 * cutoff.r_c {
            report.quarter_tube.absorb(&r);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    #[test]
    fn xi_on_interface_is_unit_inner_normal() {
        let traj = Trajectory::sphere(2, 1.0, None).unwrap();
        let cut = Cutoff::new(0.4, 1.0);
        let v = xi(&traj, &cut, &[0.6, 0.8], 0.0).unwrap();
        assert!((norm(&v) - 1.0).abs() < 1e-14);
        assert!((v[0] + 0.6).abs() < 1e-14 && (v[1] + 0.8).abs() < 1e-14);
        // dist = r_c / 2
        assert_eq!(norm(&xi(&traj, &cut, &[1.2, 0.0], 0.0).unwrap()), 0.0);
        // dist = r_c / 4
        let v = xi(&traj, &cut, &[0.9, 0.0], 0.0).unwrap();
        assert!((norm(&v) - 0.9375).abs() < 1e-14);
        // center lies outside the tube
        assert_eq!(norm(&xi(&traj, &cut, &[0.0, 0.0], 0.0).unwrap()), 0.0);
    }

    #[test]
    fn center_inside_tube_is_an_error() {
        let traj = Trajectory::sphere(2, 0.1, None).unwrap();
        let cut = Cutoff::new(0.4, 1.0);
        assert!(xi(&traj, &cut, &[0.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn plane_has_no_curvature() {
        let traj = Trajectory::plane(vec![1.0, 1.0], 0.1).unwrap();
        let cut = Cutoff::new(0.5, 1.0);
        for x in [[0.0, 0.0], [0.3, -0.1], [2.0, 2.0]] {
            assert_eq!(extended_curvature(&traj, &cut, &x, 0.3).unwrap(), vec![0.0, 0.0]);
        }
    }

    #[test]
    fn circle_curvature_matches_divergence_of_normal() {
        // R(t) = 0.5 at t = 3/8 for R0 = 1, d = 2
        let traj = Trajectory::sphere(2, 1.0, None).unwrap();
        let cut = Cutoff::new(0.2, 1.0);
        let t = 0.375;
        let x = [0.3, 0.4];
        let h = extended_curvature(&traj, &cut, &x, t).unwrap();
        assert!((norm(&h) - 2.0).abs() < 1e-12);
        assert!((h[0] + 2.0 * 0.6).abs() < 1e-12 && (h[1] + 2.0 * 0.8).abs() < 1e-12);

        // oracle: H = -(∇·n) n with ∇·n by central differences of the normal
        let step = 1e-5;
        let mut div = 0.0;
        for i in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += step;
            xm[i] -= step;
            div += (traj.inner_normal(&xp).unwrap()[i] - traj.inner_normal(&xm).unwrap()[i])
                / (2.0 * step);
        }
        let n = traj.inner_normal(&x).unwrap();
        for i in 0..2 {
            assert!((h[i] + div * n[i]).abs() < 1e-8);
        }
        // outside the support
        assert_eq!(norm(&extended_curvature(&traj, &cut, &[0.7, 0.0], t).unwrap()), 0.0);
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let traj = Trajectory::sphere(3, 1.0, Some(vec![0.1, 0.0, 0.0])).unwrap();
        let cut = Cutoff::new(0.4, 1.0);
        for x in [[0.9, 0.2, 0.1], [1.0, 0.1, 0.05], [0.1, 0.95, 0.0], [1.25, 0.0, 0.0]] {
            let f = point_fields(&traj, &cut, &x, 0.05).unwrap();
            let fd = grad_extended_curvature_fd(&traj, &cut, &x, 0.05, 1e-5).unwrap();
            for (a, b) in f.grad_curvature.iter().zip(&fd) {
                assert!((a - b).abs() < 1e-6, "{a} vs {b} at {x:?}");
            }
            let trace: f64 = (0..3).map(|i| f.grad_curvature[i * 3 + i]).sum();
            assert!((trace - f.div_curvature).abs() < 1e-12);
        }
    }

    #[test]
    fn plane_residuals_vanish() {
        let traj = Trajectory::plane(vec![0.0, 1.0], 0.0).unwrap();
        let cut = Cutoff::new(0.5, 1.0);
        let pts: Vec<Vec<f64>> = (0..41)
            .map(|k| vec![0.2, -0.25 + 0.5 * k as f64 / 40.0])
            .collect();
        let rep = xi_pde_residuals(&traj, &cut, pts.iter().map(|p| p.as_slice()), 0.0, 1e-4, 1e-3)
            .unwrap();
        assert!(rep.max_transport < 1e-12);
        assert!(rep.max_length < 1e-12);
        // -∇·ξ = -η'(s), which is O(dist) but not zero
        assert!(rep.quarter_tube.curvature_over_dist > 0.0);
        assert!((rep.quarter_tube.curvature_over_dist - 2.0 / 0.25).abs() < 1e-9);
    }

    #[test]
    fn sphere_curvature_residual_closed_form() {
        // -∇·ξ - H·ξ = 2 c s / r_c² + (d-1) η (R - r)/(r R) inside the quarter tube
        let traj = Trajectory::sphere(2, 1.0, None).unwrap();
        let cut = Cutoff::new(0.4, 1.0);
        for r in [0.92, 0.97, 1.03, 1.08] {
            let res = xi_residuals_at(&traj, &cut, &[r, 0.0], 0.0, 1e-5).unwrap();
            let s = 1.0 - r;
            let eta = 1.0 - s * s / 0.16;
            let expected = (2.0 * s / 0.16 + eta * s / r).abs();
            assert!((res.curvature - expected).abs() < 1e-12);
            assert!(res.transport < 1e-8 && res.length < 1e-8);
        }
    }
}
