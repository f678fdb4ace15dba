//! Double-well potentials and the maps derived from them.
//!
//! A [`Potential`] is a polynomial `W(s) = Σ c_k s^k` that vanishes at `±1`,
//! is positive in between, is even, and is normalized so that
//! `∫_{-1}^{1} √(2W(s)) ds = 2`. The normalization makes the surface tension of
//! the diffuse interface equal to two, so the Ginzburg-Landau energy of a
//! transition layer approximates twice the area of the interface.
//!
//! Two objects are derived from `W`:
//!
//! * the equilibrium profile `θ`, the odd solution of `θ' = √(2W(θ))`
//!   connecting `-1` to `+1` (see [`profile`]);
//! * the Modica-Mortola map `ψ(u) = ∫_0^u √(2W(s)) ds` ([`Potential::psi`]).

pub mod profile;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::composite_gauss;

pub use profile::{solve_profile, ProfileTable, DEFAULT_SAMPLES, DEFAULT_S_MAX};

/// Number of panels in the ψ lookup table of non-standard potentials.
pub const PSI_TABLE_PANELS: usize = 1024;

/// Tolerance on `∫ √(2W) = 2` accepted for a shipped or user potential.
pub const NORMALIZATION_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialKind {
    /// `W(s) = 9/8 (1 - s²)²`, with closed-form ψ.
    StandardQuartic,
    /// Arbitrary even polynomial given by its coefficients.
    Polynomial,
}

/// Serializable description of a potential, as it appears in run configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        Self {
            name: "standard".into(),
            coefficients: None,
        }
    }
}

impl PotentialConfig {
    pub fn build(&self) -> Result<Potential> {
        match (self.name.as_str(), &self.coefficients) {
            ("standard", _) => Ok(Potential::standard()),
            ("polynomial", Some(c)) => Potential::polynomial(c.clone()),
            ("polynomial", None) => Err(Error::InvalidPotential(
                "polynomial potential needs a coefficient list".into(),
            )),
            (other, _) => Err(Error::UnknownPotential(other.to_string())),
        }
    }
}

/// A validated double-well potential.
#[derive(Debug, Clone)]
pub struct Potential {
    kind: PotentialKind,
    coeffs: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
    max_ddw: f64,
    well_constant: f64,
    normalization: f64,
    psi_table: Option<Vec<f64>>,
}

fn horner(c: &[f64], s: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * s + a)
}

fn derivative(c: &[f64]) -> Vec<f64> {
    c.iter()
        .enumerate()
        .skip(1)
        .map(|(k, a)| k as f64 * a)
        .collect()
}

impl Potential {
    /// The normalized standard double well `W(s) = 9/8 (1 - s²)²`.
    pub fn standard() -> Self {
        Self::build(
            PotentialKind::StandardQuartic,
            vec![9.0 / 8.0, 0.0, -9.0 / 4.0, 0.0, 9.0 / 8.0],
        )
        .expect("the standard quartic satisfies every potential invariant")
    }

    /// A user-defined potential from ascending polynomial coefficients.
    pub fn polynomial(coefficients: Vec<f64>) -> Result<Self> {
        Self::build(PotentialKind::Polynomial, coefficients)
    }

    pub fn by_name(name: &str) -> Result<Self> {
        PotentialConfig {
            name: name.to_string(),
            coefficients: None,
        }
        .build()
    }

    fn build(kind: PotentialKind, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidPotential(
                "coefficients must be a nonempty list of finite numbers".into(),
            ));
        }
        let d1 = derivative(&coeffs);
        let d2 = derivative(&d1);
        let w = |s: f64| horner(&coeffs, s);
        let scale = coeffs.iter().map(|c| c.abs()).fold(1.0, f64::max);

        for s in [-1.0, 1.0] {
            if w(s).abs() > 1e-12 * scale {
                return Err(Error::InvalidPotential(format!(
                    "W({s}) = {:e}, expected 0",
                    w(s)
                )));
            }
        }
        let n_samples = 2000;
        for k in 0..=n_samples {
            let s = -3.0 + 6.0 * k as f64 / n_samples as f64;
            if (w(s) - w(-s)).abs() > 1e-12 * scale * (1.0 + s.abs().powi(coeffs.len() as i32)) {
                return Err(Error::InvalidPotential(format!(
                    "W is not symmetric: W({s}) != W({})",
                    -s
                )));
            }
        }
        for k in 1..n_samples {
            let s = -1.0 + 2.0 * k as f64 / n_samples as f64;
            if w(s) <= 0.0 {
                return Err(Error::InvalidPotential(format!(
                    "W({s}) = {:e} is not positive inside the wells",
                    w(s)
                )));
            }
        }

        // Empirical constant in W(s) ≥ c min{|s-1|², |s+1|²}.
        let well_constant = (0..=6000)
            .map(|k| -3.0 + 6.0 * k as f64 / 6000.0)
            .filter(|s| (s.abs() - 1.0).abs() > 1e-6)
            .map(|s| {
                let gap = (s - 1.0).powi(2).min((s + 1.0).powi(2));
                w(s) / gap
            })
            .fold(f64::INFINITY, f64::min);
        if !(well_constant > 0.0) {
            return Err(Error::InvalidPotential(format!(
                "no positive quadratic lower bound near the wells (c = {well_constant:e})"
            )));
        }

        let max_ddw = (0..=n_samples)
            .map(|k| horner(&d2, -1.0 + 2.0 * k as f64 / n_samples as f64).abs())
            .fold(0.0, f64::max);

        let sqrt2w = |s: f64| (2.0 * w(s)).max(0.0).sqrt();
        let normalization = composite_gauss(sqrt2w, -1.0, 1.0, 256);
        if (normalization - 2.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidPotential(format!(
                "normalization ∫√(2W) = {normalization:.12} differs from 2"
            )));
        }

        let psi_table = match kind {
            PotentialKind::StandardQuartic => None,
            PotentialKind::Polynomial => Some(build_psi_table(sqrt2w)),
        };

        Ok(Self {
            kind,
            coeffs,
            d1,
            d2,
            max_ddw,
            well_constant,
            normalization,
            psi_table,
        })
    }

    pub fn kind(&self) -> PotentialKind {
        self.kind
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    #[inline]
    pub fn w(&self, s: f64) -> f64 {
        horner(&self.coeffs, s)
    }

    #[inline]
    pub fn dw(&self, s: f64) -> f64 {
        horner(&self.d1, s)
    }

    #[inline]
    pub fn ddw(&self, s: f64) -> f64 {
        horner(&self.d2, s)
    }

    /// `√(2W(s))` with `s` clamped to `[-1, 1]`.
    #[inline]
    pub fn sqrt_2w(&self, s: f64) -> f64 {
        (2.0 * self.w(s.clamp(-1.0, 1.0))).max(0.0).sqrt()
    }

    /// `max |W''|` on `[-1, 1]`; the stiffness bound used for time-step limits.
    pub fn max_ddw_on_unit_interval(&self) -> f64 {
        self.max_ddw
    }

    /// Recorded `c` in `W(s) ≥ c min{|s-1|², |s+1|²}` (sampled on `[-3, 3]`).
    pub fn well_constant(&self) -> f64 {
        self.well_constant
    }

    /// Quadrature value of `∫_{-1}^{1} √(2W)`.
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    /// Modica-Mortola map `ψ(u) = ∫_0^u √(2W)`. Inputs outside `[-1, 1]` are clamped.
    pub fn psi(&self, u: f64) -> f64 {
        let u = u.clamp(-1.0, 1.0);
        match &self.psi_table {
            None => 1.5 * (u - u * u * u / 3.0),
            Some(table) => {
                let x = (u + 1.0) * 0.5 * PSI_TABLE_PANELS as f64;
                let k = (x.floor() as usize).min(PSI_TABLE_PANELS - 1);
                let frac = x - k as f64;
                table[k] + frac * (table[k + 1] - table[k])
            }
        }
    }
}

/// ψ at the nodes `u_k = -1 + 2k/PSI_TABLE_PANELS`, integrated outward from 0
/// and scaled so that `ψ(±1) = ±1` exactly.
fn build_psi_table<F: Fn(f64) -> f64>(sqrt2w: F) -> Vec<f64> {
    let n = PSI_TABLE_PANELS;
    let mid = n / 2;
    let du = 2.0 / n as f64;
    let node = |k: usize| -1.0 + du * k as f64;
    let mut table = vec![0.0; n + 1];
    for k in mid..n {
        table[k + 1] = table[k] + composite_gauss(&sqrt2w, node(k), node(k + 1), 1);
    }
    for k in (1..=mid).rev() {
        table[k - 1] = table[k] - composite_gauss(&sqrt2w, node(k - 1), node(k), 1);
    }
    let top = table[n];
    let bottom = -table[0];
    for (k, v) in table.iter_mut().enumerate() {
        *v /= if k >= mid { top } else { bottom };
    }
    table
}

/// Clamp `u` into `[-1, 1]`, reporting whether it was outside by more than `tol`.
#[inline]
pub fn clamp_unit(u: f64, tol: f64) -> (f64, bool) {
    (u.clamp(-1.0, 1.0), u.abs() > 1.0 + tol)
}
