//! Exact shifted-Laplacian solves on full 2D grids.
//!
//! A cell-centered grid with reflecting walls is the restriction of a
//! periodic grid of twice the size to one quadrant of the even extension, so
//! the five-point Laplacian is diagonal in the Fourier basis of length `2N`.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
pub(crate) struct Spectral {
    n: usize,
    /// `(2 - 2cos(πk/N)) / h²` for `k < 2N`.
    symbol: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Spectral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Spectral").field("n", &self.n).finish()
    }
}

impl PartialEq for Spectral {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.symbol == other.symbol
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], m: usize) {
    const B: usize = 32;
    for jb in (0..m).step_by(B) {
        for ib in (0..m).step_by(B) {
            for j in jb..(jb + B).min(m) {
                for i in ib..(ib + B).min(m) {
                    dst[i * m + j] = src[j * m + i];
                }
            }
        }
    }
}

impl Spectral {
    pub(crate) fn new(n: usize, h: f64) -> Self {
        let m = 2 * n;
        let mut planner = FftPlanner::new();
        let symbol = (0..m)
            .map(|k| (2.0 - 2.0 * (std::f64::consts::PI * k as f64 / n as f64).cos()) / (h * h))
            .collect();
        Self {
            n,
            symbol,
            forward: planner.plan_fft_forward(m),
            inverse: planner.plan_fft_inverse(m),
        }
    }

    fn rows(&self, plan: &Arc<dyn Fft<f64>>, data: &mut [Complex64]) {
        let m = 2 * self.n;
        data.par_chunks_mut(m).for_each(|row| {
            let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
            plan.process_with_scratch(row, &mut scratch);
        });
    }

    /// Solve `(I - a Δ) x = b` on the `N × N` grid (row-major, `y` outer).
    pub(crate) fn solve(&self, a: f64, b: &[f64], x: &mut [f64]) {
        let n = self.n;
        let m = 2 * n;
        let mut data = vec![Complex64::default(); m * m];
        data.par_chunks_mut(m).enumerate().for_each(|(j, row)| {
            let src = if j < n { j } else { m - 1 - j };
            for i in 0..n {
                let v = Complex64::new(b[src * n + i], 0.0);
                row[i] = v;
                row[m - 1 - i] = v;
            }
        });
        let mut work = vec![Complex64::default(); m * m];
        self.rows(&self.forward, &mut data);
        transpose(&data, &mut work, m);
        self.rows(&self.forward, &mut work);
        // work is indexed [kx][ky]
        work.par_chunks_mut(m).enumerate().for_each(|(kx, row)| {
            let sx = self.symbol[kx];
            for (ky, v) in row.iter_mut().enumerate() {
                *v /= 1.0 + a * (sx + self.symbol[ky]);
            }
        });
        self.rows(&self.inverse, &mut work);
        transpose(&work, &mut data, m);
        self.rows(&self.inverse, &mut data);
        let scale = 1.0 / (m * m) as f64;
        x.par_chunks_mut(n).enumerate().for_each(|(j, row)| {
            for (i, v) in row.iter_mut().enumerate() {
                *v = data[j * m + i].re * scale;
            }
        });
    }
}
