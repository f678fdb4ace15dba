//! The one-dimensional equilibrium profile `θ`.
//!
//! `θ` solves `θ' = √(2W(θ))`, `θ(0) = 0`, and is odd. It is tabulated on
//! `[-s_max, s_max]` and evaluated by monotone cubic Hermite interpolation;
//! beyond `s_max` it is clamped to `±1`.

use super::Potential;
use crate::error::{Error, Result};

pub const DEFAULT_S_MAX: f64 = 8.0;
pub const DEFAULT_SAMPLES: usize = 2049;

/// Tolerance on the step-doubling estimate of the RK4 global error.
const ODE_TOL: f64 = 1e-10;
const SUBSTEPS: usize = 8;

#[derive(Debug, Clone)]
pub struct ProfileTable {
    s_max: f64,
    step: f64,
    /// Samples on `[-s_max, s_max]`, `2n - 1` of them.
    s: Vec<f64>,
    theta: Vec<f64>,
    dtheta: Vec<f64>,
    slopes: Vec<f64>,
    tail_bound: f64,
    ode_error: f64,
}

fn integrate(p: &Potential, step: f64, n: usize, substeps: usize) -> Vec<f64> {
    let g = |th: f64| p.sqrt_2w(th.min(1.0));
    let h = step / substeps as f64;
    let mut out = Vec::with_capacity(n);
    let mut th = 0.0_f64;
    out.push(th);
    for _ in 1..n {
        for _ in 0..substeps {
            let k1 = g(th);
            let k2 = g(th + 0.5 * h * k1);
            let k3 = g(th + 0.5 * h * k2);
            let k4 = g(th + h * k3);
            th += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        out.push(th);
    }
    out
}

/// Solve the profile ODE with RK4 on `[0, s_max]` and mirror it by oddness.
pub fn solve_profile(p: &Potential, s_max: f64, n_samples: usize) -> Result<ProfileTable> {
    if !(s_max >= 5.0) {
        return Err(Error::InvalidArgument(format!(
            "s_max must be at least 5, got {s_max}"
        )));
    }
    if n_samples < 64 {
        return Err(Error::InvalidArgument(format!(
            "need at least 64 profile samples, got {n_samples}"
        )));
    }
    let step = s_max / (n_samples - 1) as f64;
    let coarse = integrate(p, step, n_samples, SUBSTEPS);
    let fine = integrate(p, step, n_samples, 2 * SUBSTEPS);
    let ode_error = coarse
        .iter()
        .zip(&fine)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if !(ode_error <= ODE_TOL) {
        return Err(Error::ProfileNonConvergence(format!(
            "step-doubling error {ode_error:e} exceeds {ODE_TOL:e}"
        )));
    }
    let last = *fine.last().unwrap();
    if !(last > 1.0 - 1e-4 && last <= 1.0 + 1e-12) {
        return Err(Error::ProfileNonConvergence(format!(
            "θ(s_max) = {last} does not approach the well at +1"
        )));
    }

    let half: Vec<f64> = fine.into_iter().map(|t| t.min(1.0)).collect();
    let total = 2 * n_samples - 1;
    let mut s = Vec::with_capacity(total);
    let mut theta = Vec::with_capacity(total);
    for i in (1..n_samples).rev() {
        s.push(-(i as f64) * step);
        theta.push(-half[i]);
    }
    for (i, &th) in half.iter().enumerate() {
        s.push(i as f64 * step);
        theta.push(th);
    }
    let dtheta: Vec<f64> = theta.iter().map(|&t| p.sqrt_2w(t)).collect();
    let slopes = fritsch_carlson(&theta, &dtheta, step);

    Ok(ProfileTable {
        s_max,
        step,
        s,
        theta,
        dtheta,
        slopes,
        tail_bound: 1.0 - last.min(1.0),
        ode_error,
    })
}

/// Limit the Hermite slopes so that the interpolant is monotone on every interval.
fn fritsch_carlson(values: &[f64], derivs: &[f64], step: f64) -> Vec<f64> {
    let mut m = derivs.to_vec();
    for k in 0..values.len() - 1 {
        let secant = (values[k + 1] - values[k]) / step;
        if secant == 0.0 {
            m[k] = 0.0;
            m[k + 1] = 0.0;
            continue;
        }
        let a = m[k] / secant;
        let b = m[k + 1] / secant;
        let r = a * a + b * b;
        if r > 9.0 {
            let tau = 3.0 / r.sqrt();
            m[k] = tau * a * secant;
            m[k + 1] = tau * b * secant;
        }
    }
    m
}

impl ProfileTable {
    pub fn s_max(&self) -> f64 {
        self.s_max
    }

    pub fn abscissae(&self) -> &[f64] {
        &self.s
    }

    pub fn values(&self) -> &[f64] {
        &self.theta
    }

    pub fn derivatives(&self) -> &[f64] {
        &self.dtheta
    }

    /// `1 - θ(s_max)`: the size of the jump introduced by clamping the tails.
    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    /// Step-doubling estimate of the ODE integration error.
    pub fn ode_error(&self) -> f64 {
        self.ode_error
    }

    #[inline]
    fn locate(&self, s: f64) -> (usize, f64) {
        let x = (s + self.s_max) / self.step;
        let k = (x.floor() as usize).min(self.s.len() - 2);
        (k, x - k as f64)
    }

    /// `θ(s)`, clamped to `±1` for `|s| ≥ s_max`.
    pub fn eval(&self, s: f64) -> f64 {
        if s >= self.s_max {
            return 1.0;
        }
        if s <= -self.s_max {
            return -1.0;
        }
        let (k, t) = self.locate(s);
        let (y0, y1) = (self.theta[k], self.theta[k + 1]);
        let (m0, m1) = (self.slopes[k] * self.step, self.slopes[k + 1] * self.step);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * m1
    }

    /// Derivative of the interpolant; zero in the clamped tails.
    pub fn derivative(&self, s: f64) -> f64 {
        if s.abs() >= self.s_max {
            return 0.0;
        }
        let (k, t) = self.locate(s);
        let (y0, y1) = (self.theta[k], self.theta[k + 1]);
        let (m0, m1) = (self.slopes[k] * self.step, self.slopes[k + 1] * self.step);
        let t2 = t * t;
        ((6.0 * t2 - 6.0 * t) * y0
            + (3.0 * t2 - 4.0 * t + 1.0) * m0
            + (-6.0 * t2 + 6.0 * t) * y1
            + (3.0 * t2 - 2.0 * t) * m1)
            / self.step
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn standard() -> ProfileTable {
        solve_profile(&Potential::standard(), DEFAULT_S_MAX, DEFAULT_SAMPLES).unwrap()
    }

    #[test]
    fn matches_tanh_closed_form() {
        let table = standard();
        assert_eq!(table.eval(0.0), 0.0);
        assert!((table.eval(1.0) - 0.905_148_253_644_866_6).abs() < 1e-8);
        for k in 0..=1600 {
            let s = -8.0 + k as f64 * 0.01;
            assert!(
                (table.eval(s) - (1.5 * s).tanh()).abs() < 1e-8,
                "s = {s}"
            );
        }
        assert!(1.0 - table.eval(5.0) <= (-6.0f64).exp());
    }

    #[test]
    fn odd_and_monotone_samples() {
        let table = standard();
        let th = table.values();
        let n = th.len();
        for i in 0..n {
            assert_eq!(th[i], -th[n - 1 - i]);
        }
        assert!(th.windows(2).all(|w| w[1] >= w[0]));
        assert!(table.derivatives().iter().all(|&d| d >= 0.0));
    }

    #[test]
    fn equilibrium_identity_by_finite_differences() {
        let p = Potential::standard();
        let table = standard();
        let s = table.abscissae();
        let th = table.values();
        let h = s[1] - s[0];
        let mut worst = 0.0_f64;
        for i in 1..th.len() - 1 {
            let second = (th[i + 1] - 2.0 * th[i] + th[i - 1]) / (h * h);
            worst = worst.max((second - p.dw(th[i])).abs());
        }
        assert!(worst < 1e-4, "θ'' - W'(θ) = {worst:e}");
    }

    #[test]
    fn derivative_consistent_with_samples() {
        let p = Potential::standard();
        let table = standard();
        let worst = table
            .abscissae()
            .iter()
            .zip(table.values())
            .map(|(&s, &th)| (table.derivative(s) - p.sqrt_2w(th)).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-8, "{worst:e}");
    }

    #[test]
    fn rejects_bad_arguments() {
        let p = Potential::standard();
        assert!(solve_profile(&p, 4.0, 100).is_err());
        assert!(solve_profile(&p, 8.0, 10).is_err());
    }
}
