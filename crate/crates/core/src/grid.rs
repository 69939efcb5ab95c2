//! Discretization grids shared by every field: the periodic spatial lattice,
//! the arc-length grid along the primitive chain and the age grid.

use crate::tensor::Vector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Uniform `n × n` lattice on the torus `[0, L)²`.
///
/// Cell `c = ix * n + iy` sits at `(ix Δx, iy Δx)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicGrid {
    pub n: usize,
    pub length: f64,
}

impl PeriodicGrid {
    pub fn new(n: usize, length: f64) -> Self {
        assert!(n >= 4 && n % 2 == 0, "grid size must be even and >= 4");
        assert!(length > 0.0);
        Self { n, length }
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn cells(&self) -> usize {
        self.n * self.n
    }

    pub fn coords(&self, c: usize) -> (f64, f64) {
        let dx = self.dx();
        ((c / self.n) as f64 * dx, (c % self.n) as f64 * dx)
    }

    pub fn map<T: Send, F: Fn(f64, f64) -> T + Sync>(&self, f: F) -> Vec<T> {
        (0..self.cells())
            .into_par_iter()
            .map(|c| {
                let (x, y) = self.coords(c);
                f(x, y)
            })
            .collect()
    }
}

/// Arc-length grid on `[-1/2, 1/2]` with `intervals + 1` nodes; `s = 0` is
/// node `intervals / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArcGrid {
    pub intervals: usize,
}

impl ArcGrid {
    pub fn new(intervals: usize) -> Self {
        assert!(intervals >= 2 && intervals % 2 == 0, "arc-length intervals must be even");
        Self { intervals }
    }

    pub fn nodes(&self) -> usize {
        self.intervals + 1
    }

    pub fn ds(&self) -> f64 {
        1.0 / self.intervals as f64
    }

    pub fn s(&self, k: usize) -> f64 {
        -0.5 + k as f64 * self.ds()
    }

    pub fn centre(&self) -> usize {
        self.intervals / 2
    }

    /// Trapezoid weights over `[-1/2, 1/2]`.
    pub fn weights(&self) -> Vec<f64> {
        let ds = self.ds();
        (0..self.nodes())
            .map(|k| if k == 0 || k == self.intervals { 0.5 * ds } else { ds })
            .collect()
    }

    /// `1` at interior nodes, `0` at `s = ±1/2`.
    pub fn inflow_profile(&self) -> Vec<f64> {
        (0..self.nodes())
            .map(|k| if k == 0 || k == self.intervals { 0.0 } else { 1.0 })
            .collect()
    }
}

/// Age grid `T_j = j ΔT`, `j = 0..=n_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgeGrid {
    pub n_t: usize,
    pub dt_age: f64,
}

impl AgeGrid {
    pub fn new(n_t: usize, dt_age: f64) -> Self {
        assert!(n_t >= 1 && dt_age > 0.0);
        Self { n_t, dt_age }
    }

    pub fn slices(&self) -> usize {
        self.n_t + 1
    }

    pub fn age(&self, j: usize) -> f64 {
        j as f64 * self.dt_age
    }

    pub fn t_max(&self) -> f64 {
        self.n_t as f64 * self.dt_age
    }

    /// Trapezoid weights over `[0, T_max]`.
    pub fn weights(&self) -> Vec<f64> {
        (0..self.slices())
            .map(|j| if j == 0 || j == self.n_t { 0.5 * self.dt_age } else { self.dt_age })
            .collect()
    }
}

/// Bilinear interpolation stencil at a semi-Lagrangian departure point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencil {
    pub idx: [usize; 4],
    pub w: [f64; 4],
}

impl Stencil {
    pub fn apply(&self, field: &[f64]) -> f64 {
        self.w[0] * field[self.idx[0]]
            + self.w[1] * field[self.idx[1]]
            + self.w[2] * field[self.idx[2]]
            + self.w[3] * field[self.idx[3]]
    }
}

/// Departure stencils `x - dt v(x)` for every cell. Weights are nonnegative
/// and sum to one.
pub fn departure_stencils(grid: &PeriodicGrid, v: &[Vector<2>], dt: f64) -> Vec<Stencil> {
    let n = grid.n;
    let inv_dx = 1.0 / grid.dx();
    (0..grid.cells())
        .into_par_iter()
        .map(|c| {
            let (ix, iy) = (c / n, c % n);
            let fx = ix as f64 - dt * v[c].0[0] * inv_dx;
            let fy = iy as f64 - dt * v[c].0[1] * inv_dx;
            let (x0, y0) = (fx.floor(), fy.floor());
            let (ax, ay) = (fx - x0, fy - y0);
            let wrap = |i: f64| (i as i64).rem_euclid(n as i64) as usize;
            let (i0, j0) = (wrap(x0), wrap(y0));
            let (i1, j1) = ((i0 + 1) % n, (j0 + 1) % n);
            Stencil {
                idx: [i0 * n + j0, i1 * n + j0, i0 * n + j1, i1 * n + j1],
                w: [(1.0 - ax) * (1.0 - ay), ax * (1.0 - ay), (1.0 - ax) * ay, ax * ay],
            }
        })
        .collect()
}
