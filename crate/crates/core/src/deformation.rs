//! Age-structured deformation gradient `G(t, T, x)`:
//!
//! ```text
//! d_t G + (1/We) ∂_T G = G · ∇v,    G|_{T=0} = δ
//! ```
//!
//! A step is the exact age shift (inflow `δ`), then on every older slice a
//! Strang splitting of the local source `G ← G exp(dt ∇v)` around
//! pseudo-spectral Heun transport `∂_t G + v · ∇G = 0`.

use crate::grid::{AgeGrid, PeriodicGrid};
use crate::report::{Check, Report};
use crate::spectral::Spectral;
use crate::tensor::{Dot, Tensor2, Vector};
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

/// Largest `dt |v|_∞ k_max` accepted by the transport sub-step.
pub const TRANSPORT_CFL: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeformationError {
    #[error("time step {dt} violates the transport CFL condition; admissible dt <= {admissible}")]
    Cfl { dt: f64, admissible: f64 },
    #[error("time step {dt} does not match We * dT = {expected}")]
    AgeMismatch { dt: f64, expected: f64 },
    #[error("field length mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
}

/// Where the characteristic through an age slice started.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Origin {
    /// Injected at `T = 0` with `det = 1`.
    Inflow,
    /// An initial-data slice; `det` along characteristics stays in this range.
    Initial { det_min: f64, det_max: f64 },
}

/// `G` on `(age slice j, cell c)` with cell fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformationField {
    grid: PeriodicGrid,
    age: AgeGrid,
    values: Vec<Tensor2<2>>,
    origin: Vec<Origin>,
}

impl DeformationField {
    pub fn from_fn(grid: PeriodicGrid, age: AgeGrid, f: impl Fn(f64, f64, f64) -> Tensor2<2> + Sync) -> Self {
        let cells = grid.cells();
        let mut values = Vec::with_capacity(age.slices() * cells);
        for j in 0..age.slices() {
            let t = age.age(j);
            values.extend(grid.map(|x, y| f(t, x, y)));
        }
        Self::from_values(grid, age, values).expect("sized by construction")
    }

    pub fn from_values(grid: PeriodicGrid, age: AgeGrid, values: Vec<Tensor2<2>>) -> Result<Self, DeformationError> {
        let cells = grid.cells();
        let expected = cells * age.slices();
        if values.len() != expected {
            return Err(DeformationError::Shape { expected, got: values.len() });
        }
        let origin = values
            .chunks(cells)
            .map(|s| {
                let (lo, hi) = s.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), g| {
                    let d = g.det();
                    (lo.min(d), hi.max(d))
                });
                Origin::Initial { det_min: lo, det_max: hi }
            })
            .collect();
        Ok(Self { grid, age, values, origin })
    }

    /// Quiescent past: `G ≡ δ`.
    pub fn identity(grid: PeriodicGrid, age: AgeGrid) -> Self {
        Self::from_values(grid, age, vec![Tensor2::identity(); grid.cells() * age.slices()]).unwrap()
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn age(&self) -> &AgeGrid {
        &self.age
    }

    pub fn values(&self) -> &[Tensor2<2>] {
        &self.values
    }

    pub fn origins(&self) -> &[Origin] {
        &self.origin
    }

    pub fn slice(&self, j: usize) -> &[Tensor2<2>] {
        let n = self.grid.cells();
        &self.values[j * n..(j + 1) * n]
    }

    pub fn get(&self, j: usize, c: usize) -> Tensor2<2> {
        self.values[j * self.grid.cells() + c]
    }
}

/// `(min det G, min |G|, worst deviation of det G from its characteristic value)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetDiagnostics {
    pub min_det: f64,
    pub min_norm: f64,
    pub drift: f64,
}

pub fn det_diagnostics(g: &DeformationField) -> DetDiagnostics {
    let cells = g.grid.cells();
    let per_slice: Vec<(f64, f64, f64)> = g
        .values
        .par_chunks(cells)
        .zip(g.origin.par_iter())
        .map(|(slice, origin)| {
            let (lo, hi) = match *origin {
                Origin::Inflow => (1.0, 1.0),
                Origin::Initial { det_min, det_max } => (det_min, det_max),
            };
            slice.iter().fold((f64::INFINITY, f64::INFINITY, 0.0_f64), |(md, mn, dr), t| {
                let d = t.det();
                let off = if d < lo { lo - d } else if d > hi { d - hi } else { 0.0 };
                (md.min(d), mn.min(t.frobenius()), dr.max(off))
            })
        })
        .collect();
    let (min_det, min_norm, drift) = per_slice
        .into_iter()
        .fold((f64::INFINITY, f64::INFINITY, 0.0_f64), |(a, b, c), (x, y, z)| (a.min(x), b.min(y), c.max(z)));
    DetDiagnostics { min_det, min_norm, drift }
}

/// Checks `det G₀ ≥ γ` at every `(T, x)`.
pub fn validate_initial_deformation(g0: &DeformationField, gamma: f64) -> Report {
    let cells = g0.grid.cells();
    let mut worst = (f64::INFINITY, 0usize);
    for (i, t) in g0.values.iter().enumerate() {
        let d = t.det();
        if d < worst.0 {
            worst = (d, i);
        }
    }
    let mut r = Report::default();
    r.push(
        Check::new("det_floor", worst.0 >= gamma, worst.0, format!("det G0 >= gamma = {gamma}"))
            .at(vec![worst.1 / cells, worst.1 % cells]),
    );
    r
}

/// Largest `dt` the transport sub-step accepts.
pub fn admissible_dt(sp: &Spectral, v: &[Vector<2>]) -> f64 {
    let vmax = v.iter().fold(0.0_f64, |m, u| m.max(u.0[0].abs()).max(u.0[1].abs()));
    let kmax = (sp.grid().n / 3) as f64 * 2.0 * std::f64::consts::PI / sp.grid().length;
    if vmax > 0.0 {
        TRANSPORT_CFL / (vmax * kmax)
    } else {
        f64::INFINITY
    }
}

// -v · ∇z for a packed pair of real components, derivatives dealiased
fn transport_tendency(sp: &Spectral, z: &[Complex64], v: &[Vector<2>]) -> Vec<Complex64> {
    let mut hat = z.to_vec();
    sp.forward_inplace(&mut hat);
    sp.dealias(&mut hat);
    let mut dx: Vec<Complex64> = hat.iter().enumerate().map(|(c, h)| sp.ik(c, 0) * h).collect();
    let mut dy: Vec<Complex64> = hat.iter().enumerate().map(|(c, h)| sp.ik(c, 1) * h).collect();
    sp.inverse_inplace(&mut dx);
    sp.inverse_inplace(&mut dy);
    dx.iter().zip(&dy).zip(v).map(|((a, b), u)| -(a * u.0[0] + b * u.0[1])).collect()
}

fn transport_slice(sp: &Spectral, slice: &mut [Tensor2<2>], v: &[Vector<2>], dt: f64) {
    for row in 0..2 {
        let z: Vec<Complex64> = slice.iter().map(|g| Complex64::new(g.0[row][0], g.0[row][1])).collect();
        let k1 = transport_tendency(sp, &z, v);
        let z1: Vec<Complex64> = z.iter().zip(&k1).map(|(a, k)| a + k * dt).collect();
        let k2 = transport_tendency(sp, &z1, v);
        let mut z2: Vec<Complex64> = z.iter().zip(k1.iter().zip(&k2)).map(|(a, (p, q))| a + (p + q) * (0.5 * dt)).collect();
        sp.forward_inplace(&mut z2);
        sp.dealias(&mut z2);
        sp.inverse_inplace(&mut z2);
        for (g, w) in slice.iter_mut().zip(&z2) {
            g.0[row][0] = w.re;
            g.0[row][1] = w.im;
        }
    }
}

/// Advance `G` by one step `dt = We ΔT`.
///
/// `grad_old`, `grad_new` are `∇v` at the start and end of the step (their
/// mean drives the exponential source); `v` transports the slices.
pub fn step_deformation(
    g: &mut DeformationField,
    sp: &Spectral,
    v: &[Vector<2>],
    grad_old: &[Tensor2<2>],
    grad_new: &[Tensor2<2>],
    dt: f64,
    we: f64,
) -> Result<(), DeformationError> {
    let cells = g.grid.cells();
    for len in [v.len(), grad_old.len(), grad_new.len()] {
        if len != cells {
            return Err(DeformationError::Shape { expected: cells, got: len });
        }
    }
    let expected = we * g.age.dt_age;
    if (dt - expected).abs() > 1e-12 * expected {
        return Err(DeformationError::AgeMismatch { dt, expected });
    }
    let admissible = admissible_dt(sp, v);
    if dt > admissible {
        return Err(DeformationError::Cfl { dt, admissible });
    }

    g.values.rotate_right(cells);
    g.values[..cells].iter_mut().for_each(|t| *t = Tensor2::identity());
    g.origin.rotate_right(1);
    g.origin[0] = Origin::Inflow;

    let moving = v.iter().any(|u| u.0[0] != 0.0 || u.0[1] != 0.0);
    let sourced = grad_old.iter().chain(grad_new).any(|t| t.max_abs() != 0.0);
    let half: Vec<Tensor2<2>> = if sourced {
        grad_old
            .par_iter()
            .zip(grad_new.par_iter())
            .map(|(a, b)| ((*a + *b) * (0.25 * dt)).exp())
            .collect()
    } else {
        Vec::new()
    };
    let apply_source = |slice: &mut [Tensor2<2>]| {
        for (t, e) in slice.iter_mut().zip(&half) {
            *t = t.dot(e);
        }
    };

    g.values[cells..].par_chunks_mut(cells).for_each(|slice| {
        if sourced {
            apply_source(slice);
        }
        if moving {
            transport_slice(sp, slice, v, dt);
        }
        if sourced {
            apply_source(slice);
        }
    });
    Ok(())
}
