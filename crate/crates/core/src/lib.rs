//! Allen-Cahn simulations checked against exact mean curvature flow.
//!
//! The crate integrates `∂_t u = Δu - ε⁻² W'(u)` from well-prepared initial
//! data `θ(dist/ε)` and evaluates, at every recorded time, the
//! Ginzburg-Landau energy, its dissipation, the relative entropy
//! `E[u|I] = ∫ ε|∇u|²/2 + W(u)/ε - ξ·∇ψ(u)` against the exact interface,
//! the coercivity integrals it controls, and the interface error
//! `‖ψ(u) - χ‖_{L¹}`. The [`experiments`] module sweeps `ε` and fits the
//! rates at which these quantities vanish.
//!
//! ```
//! use aclab::config::RunConfig;
//! use aclab::solver::run;
//!
//! let cfg = RunConfig::from_json(r#"{
//!     "epsilon": 0.1,
//!     "trajectory": {"type": "sphere", "d": 2, "R0": 1.0},
//!     "stepper": {"t_end": 0.02}
//! }"#).unwrap().resolve().unwrap();
//! let out = run(&cfg).unwrap();
//! let last = out.records.last().unwrap();
//! assert!(last.err_l1 < 5.0 * cfg.epsilon);
//! ```

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod potential;
pub mod quadrature;
pub mod solver;
mod spectral;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/potential.md")]
    mod potential {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/solver.md")]
    mod solver {}
    #[doc = include_str!("../../../book/src/diagnostics.md")]
    mod diagnostics {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
