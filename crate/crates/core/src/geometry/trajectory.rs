use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An exact smooth solution of mean curvature flow.
///
/// Signed distances are positive inside the evolving phase `Ω(t)`. For the
/// plane `Ω = {x : ν·x > offset}`; for the sphere `Ω` is the ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Trajectory {
    Plane {
        normal: Vec<f64>,
        #[serde(default)]
        offset: f64,
    },
    Sphere {
        d: usize,
        #[serde(rename = "R0")]
        r0: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
    },
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Trajectory {
    /// A plane with the given (not necessarily unit) normal, which is normalized.
    pub fn plane(normal: Vec<f64>, offset: f64) -> Result<Self> {
        let norm = dot(&normal, &normal).sqrt();
        if normal.is_empty() || !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Geometry("plane normal must be nonzero".into()));
        }
        Ok(Self::Plane {
            normal: normal.iter().map(|v| v / norm).collect(),
            offset,
        })
    }

    pub fn sphere(d: usize, r0: f64, center: Option<Vec<f64>>) -> Result<Self> {
        let traj = Self::Sphere { d, r0, center };
        traj.check()?;
        Ok(traj)
    }

    /// Structural validity: dimensions agree, radius positive, normal unit length.
    pub fn check(&self) -> Result<()> {
        match self {
            Self::Plane { normal, .. } => {
                let n = dot(normal, normal).sqrt();
                if normal.is_empty() || (n - 1.0).abs() > 1e-12 {
                    return Err(Error::Geometry(format!(
                        "plane normal must be a unit vector (|ν| = {n})"
                    )));
                }
            }
            Self::Sphere { d, r0, center } => {
                if *d == 0 {
                    return Err(Error::Geometry("sphere dimension must be ≥ 1".into()));
                }
                if !(*r0 > 0.0) || !r0.is_finite() {
                    return Err(Error::Geometry(format!("sphere radius {r0} must be positive")));
                }
                if let Some(c) = center {
                    if c.len() != *d {
                        return Err(Error::Geometry(format!(
                            "sphere center has {} components, expected {d}",
                            c.len()
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Plane { normal, .. } => normal.len(),
            Self::Sphere { d, .. } => *d,
        }
    }

    fn center_offset(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Self::Sphere {
                center: Some(c), ..
            } => x.iter().zip(c).map(|(a, b)| a - b).collect(),
            _ => x.to_vec(),
        }
    }

    pub fn center(&self) -> Vec<f64> {
        match self {
            Self::Sphere { center: Some(c), .. } => c.clone(),
            _ => vec![0.0; self.dim()],
        }
    }

    /// `R(t) = √(R0² - 2(d-1)t)` for the sphere; `None` for the plane.
    pub fn radius(&self, t: f64) -> Option<f64> {
        match self {
            Self::Plane { .. } => None,
            Self::Sphere { d, r0, .. } => {
                let r2 = r0 * r0 - 2.0 * (*d as f64 - 1.0) * t;
                Some(if r2 > 0.0 { r2.sqrt() } else { 0.0 })
            }
        }
    }

    /// Time at which the sphere shrinks to a point.
    pub fn extinction_time(&self) -> Option<f64> {
        match self {
            Self::Sphere { d, r0, .. } if *d > 1 => Some(r0 * r0 / (2.0 * (*d as f64 - 1.0))),
            _ => None,
        }
    }

    /// Scalar mean curvature `κ`, with `H_I = κ n_I` on the interface.
    pub fn curvature(&self, t: f64) -> f64 {
        match self {
            Self::Plane { .. } => 0.0,
            Self::Sphere { d, .. } => (*d as f64 - 1.0) / self.radius(t).unwrap(),
        }
    }

    /// `∂_t dist±(x, I(t))`, which equals `-κ` for both trajectories.
    pub fn distance_rate(&self, t: f64) -> f64 {
        -self.curvature(t)
    }

    pub fn signed_distance(&self, x: &[f64], t: f64) -> f64 {
        match self {
            Self::Plane { normal, offset } => dot(normal, x) - offset,
            Self::Sphere { .. } => {
                let y = self.center_offset(x);
                self.radius(t).unwrap() - dot(&y, &y).sqrt()
            }
        }
    }

    /// Phase indicator `χ = ±1`; the interface itself counts as inside.
    pub fn indicator(&self, x: &[f64], t: f64) -> f64 {
        if self.signed_distance(x, t) >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Inner unit normal at the nearest point, `n_I(P_I x) = ∇dist±(x)`.
    pub fn inner_normal(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Self::Plane { normal, .. } => Ok(normal.clone()),
            Self::Sphere { .. } => {
                let y = self.center_offset(x);
                let r = dot(&y, &y).sqrt();
                if r == 0.0 {
                    return Err(Error::Geometry(
                        "normal undefined at the sphere center".into(),
                    ));
                }
                Ok(y.iter().map(|v| -v / r).collect())
            }
        }
    }

    /// Nearest-point projection `P_I(x)` onto `I(t)`.
    pub fn projection(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        let dist = self.signed_distance(x, t);
        let n = self.inner_normal(x)?;
        // x = P x + dist · n
        Ok(x.iter().zip(&n).map(|(a, b)| a - dist * b).collect())
    }

    /// Hessian of the signed distance (row-major, `d × d`).
    pub fn distance_hessian(&self, x: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        match self {
            Self::Plane { .. } => Ok(vec![0.0; d * d]),
            Self::Sphere { .. } => {
                let y = self.center_offset(x);
                let r = dot(&y, &y).sqrt();
                if r == 0.0 {
                    return Err(Error::Geometry(
                        "distance Hessian undefined at the sphere center".into(),
                    ));
                }
                let mut h = vec![0.0; d * d];
                for i in 0..d {
                    for j in 0..d {
                        let delta = if i == j { 1.0 } else { 0.0 };
                        h[i * d + j] = -(delta - y[i] * y[j] / (r * r)) / r;
                    }
                }
                Ok(h)
            }
        }
    }

    /// Distance from `x` to the center (sphere) or `|dist±|` (plane).
    pub fn radial_coordinate(&self, x: &[f64]) -> f64 {
        let y = self.center_offset(x);
        dot(&y, &y).sqrt()
    }
}
