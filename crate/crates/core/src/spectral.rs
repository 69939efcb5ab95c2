//! Two-dimensional FFTs on the periodic lattice and the spectral operators
//! built on them (differentiation, 2/3-rule dealiasing).

use crate::grid::PeriodicGrid;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Clone)]
pub struct Spectral {
    grid: PeriodicGrid,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    // physical wavenumber per 1D index; Nyquist stored as -n/2
    k: Vec<f64>,
    // derivative multiplier per 1D index; Nyquist set to zero
    kd: Vec<f64>,
    keep: Vec<bool>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: PeriodicGrid) -> Self {
        let n = grid.n;
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let scale = 2.0 * PI / grid.length;
        let signed = |i: usize| if i < n / 2 { i as i64 } else { i as i64 - n as i64 };
        let k = (0..n).map(|i| signed(i) as f64 * scale).collect();
        let kd = (0..n).map(|i| if i == n / 2 { 0.0 } else { signed(i) as f64 * scale }).collect();
        let keep = (0..n).map(|i| 3 * signed(i).unsigned_abs() as usize <= n).collect();
        Self { grid, fwd, inv, k, kd, keep }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    /// `(k_x, k_y)` of spectral cell `c`.
    pub fn wavevector(&self, c: usize) -> (f64, f64) {
        let n = self.grid.n;
        (self.k[c / n], self.k[c % n])
    }

    fn deriv_vector(&self, c: usize) -> (f64, f64) {
        let n = self.grid.n;
        (self.kd[c / n], self.kd[c % n])
    }

    /// Whether cell `c` survives the 2/3 rule (`|k_i| ≤ N/3` in index units).
    pub fn kept(&self, c: usize) -> bool {
        let n = self.grid.n;
        self.keep[c / n] && self.keep[c % n]
    }

    fn transform(&self, buf: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.grid.n;
        let scratch_len = plan.get_inplace_scratch_len();
        let rows = |b: &mut [Complex64]| {
            b.par_chunks_mut(n).for_each_init(
                || vec![Complex64::new(0.0, 0.0); scratch_len],
                |scratch, row| plan.process_with_scratch(row, scratch),
            )
        };
        rows(buf);
        transpose(buf, n);
        rows(buf);
        transpose(buf, n);
    }

    /// In-place unnormalized forward transform.
    pub fn forward_inplace(&self, buf: &mut [Complex64]) {
        self.transform(buf, &self.fwd);
    }

    /// In-place inverse transform, normalized by `1/N²`.
    pub fn inverse_inplace(&self, buf: &mut [Complex64]) {
        self.transform(buf, &self.inv);
        let norm = 1.0 / self.grid.cells() as f64;
        buf.iter_mut().for_each(|z| *z *= norm);
    }

    /// Unnormalized forward transform of a real field.
    pub fn forward(&self, data: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = data.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.transform(&mut buf, &self.fwd);
        buf
    }

    /// Inverse transform (normalized by `1/N²`), returning the real part.
    pub fn inverse(&self, spec: &[Complex64]) -> Vec<f64> {
        let mut buf = spec.to_vec();
        self.transform(&mut buf, &self.inv);
        let norm = 1.0 / self.grid.cells() as f64;
        buf.iter().map(|z| z.re * norm).collect()
    }

    /// Zero every mode removed by the 2/3 rule.
    pub fn dealias(&self, spec: &mut [Complex64]) {
        spec.par_iter_mut().enumerate().for_each(|(c, z)| {
            if !self.kept(c) {
                *z = Complex64::new(0.0, 0.0);
            }
        });
    }

    /// Spectral `∂_axis`; the Nyquist mode has zero derivative.
    pub fn derivative(&self, spec: &[Complex64], axis: usize) -> Vec<Complex64> {
        spec.par_iter()
            .enumerate()
            .map(|(c, z)| {
                let (kx, ky) = self.deriv_vector(c);
                let k = if axis == 0 { kx } else { ky };
                Complex64::new(-k * z.im, k * z.re)
            })
            .collect()
    }

    /// `∂_axis f` of a real field, returned in physical space.
    pub fn derivative_real(&self, data: &[f64], axis: usize) -> Vec<f64> {
        self.inverse(&self.derivative(&self.forward(data), axis))
    }

    /// `i k_axis` for spectral cell `c` (derivative convention).
    pub fn ik(&self, c: usize, axis: usize) -> Complex64 {
        let (kx, ky) = self.deriv_vector(c);
        Complex64::new(0.0, if axis == 0 { kx } else { ky })
    }

    /// `|k|²` for spectral cell `c`.
    pub fn k2(&self, c: usize) -> f64 {
        let (kx, ky) = self.wavevector(c);
        kx * kx + ky * ky
    }
}

fn transpose(buf: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in i + 1..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}
