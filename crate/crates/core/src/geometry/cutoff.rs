use serde::{Deserialize, Serialize};

/// Quintic smoothstep `6z⁵ - 15z⁴ + 10z³` and its derivative, for `z ∈ [0, 1]`.
#[inline]
fn smoothstep5(z: f64) -> (f64, f64) {
    let z2 = z * z;
    let z3 = z2 * z;
    (
        z3 * (10.0 + z * (-15.0 + 6.0 * z)),
        30.0 * z2 * (1.0 - z) * (1.0 - z),
    )
}

/// The tubular cutoffs used to extend the interface normal and curvature.
///
/// `η̃` equals 1 on `|s| ≤ r_c/4`, vanishes for `|s| ≥ r_c/2` and is a quintic
/// smoothstep (C²) in between. The normal is extended with
/// `η(s) = (1 - c_quad s²/r_c²) η̃(s)`, so `η(0) = 1` and `η` decays
/// quadratically away from the interface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    pub r_c: f64,
    pub c_quad: f64,
}

impl Cutoff {
    pub fn new(r_c: f64, c_quad: f64) -> Self {
        Self { r_c, c_quad }
    }

    /// `(η̃(s), η̃'(s))`.
    #[inline]
    pub fn tilde(&self, s: f64) -> (f64, f64) {
        let a = s.abs();
        let q = 0.25 * self.r_c;
        if a <= q {
            (1.0, 0.0)
        } else if a >= 2.0 * q {
            (0.0, 0.0)
        } else {
            let (v, dv) = smoothstep5((a - q) / q);
            (1.0 - v, -dv / q * s.signum())
        }
    }

    /// `(η(s), η'(s))`.
    #[inline]
    pub fn eta(&self, s: f64) -> (f64, f64) {
        let (t, dt) = self.tilde(s);
        let inv = 1.0 / (self.r_c * self.r_c);
        let quad = 1.0 - self.c_quad * s * s * inv;
        (quad * t, quad * dt - 2.0 * self.c_quad * s * inv * t)
    }

    /// Sampled constant `C` in `|η'(s)| ≤ C min{1/r_c, |s|/r_c²}`.
    pub fn derivative_constant(&self) -> f64 {
        let n = 4000;
        (1..=n)
            .map(|k| 0.5 * self.r_c * k as f64 / n as f64)
            .map(|s| {
                let bound = (1.0 / self.r_c).min(s / (self.r_c * self.r_c));
                self.eta(s).1.abs() / bound
            })
            .fold(0.0, f64::max)
    }

    /// `C(I)` in `∫ min{dist², 1} e_ε(u) ≤ C(I) E[u|I]`, derived from
    /// `1 - ξ·n ≥ min{c_quad dist²/r_c², 1}` and the equipartition bound.
    pub fn distance_control_constant(&self) -> f64 {
        (self.r_c * self.r_c / self.c_quad).max(1.0) + 1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_shape() {
        let c = Cutoff::new(0.4, 1.0);
        assert_eq!(c.eta(0.0), (1.0, 0.0));
        assert_eq!(c.eta(0.2).0, 0.0);
        assert_eq!(c.eta(-0.25).0, 0.0);
        assert!((c.eta(0.1).0 - 0.9375).abs() < 1e-15);
        for k in 0..=200 {
            let s = -0.3 + 0.6 * k as f64 / 200.0;
            let (e, _) = c.eta(s);
            assert!(e >= 0.0);
            assert!(e <= (1.0 - s * s / 0.16).max(0.0) + 1e-15);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let c = Cutoff::new(0.5, 1.3);
        let d = 1e-6;
        for k in 0..=100 {
            let s = -0.3 + 0.6 * k as f64 / 100.0;
            let fd = (c.eta(s + d).0 - c.eta(s - d).0) / (2.0 * d);
            assert!((fd - c.eta(s).1).abs() < 1e-6, "s = {s}");
            let fd = (c.tilde(s + d).0 - c.tilde(s - d).0) / (2.0 * d);
            assert!((fd - c.tilde(s).1).abs() < 1e-6, "s = {s}");
        }
    }

    #[test]
    fn derivative_bound_is_finite() {
        let c = Cutoff::new(0.45, 1.0);
        let k = c.derivative_constant();
        // the smoothstep peaks at 7.5/r_c where s ≈ 3r_c/8, so C ≈ 20
        assert!(k.is_finite() && k > 15.0 && k < 25.0, "{k}");
    }
}
