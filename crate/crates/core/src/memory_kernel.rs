//! The configurational kernel `K(t, T, x, s)`, its memory `m = -∂_T K`, the
//! retraction drift `g`, and the explicit independent-alignment memory.
//!
//! ```text
//! d_t K + (1/We) ∂_T K + g ∂_s K - (1/We) ∂²_s K = 0
//! K|_{T=0} = 1,   K|_{s=±1/2} = 0,   g = ∇v : ∫₀ˢ S
//! ```
//!
//! A step with `ΔT = dt/We` is the exact age shift followed by, on every
//! age slice, semi-Lagrangian bilinear advection in `x`, first-order upwind
//! transport in `s` and a backward-Euler solve of the `s`-diffusion. Each
//! sub-step is a positive operator with row sums at most one, so the
//! discrete scheme keeps `K` inside the range of its data.

use crate::grid::{departure_stencils, AgeGrid, ArcGrid, PeriodicGrid};
use crate::quad::integrate;
use crate::report::{Check, Report};
use crate::tensor::{DoubleDot, Tensor2, Vector};
use rayon::prelude::*;
use std::f64::consts::PI;
use thiserror::Error;

/// Tolerance on the sign conditions for `m` and `∂_T m`.
pub const EPS_MONO: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("time step {dt} violates the CFL condition; admissible dt <= {admissible}")]
    Cfl { dt: f64, admissible: f64 },
    #[error("time step {dt} does not match We * dT = {expected}")]
    AgeMismatch { dt: f64, expected: f64 },
    #[error("field length mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
}

// ---------------------------------------------------------------------------
// independent-alignment memory

/// Value of the truncated series together with the `T = 0` flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    /// `T = 0`: the full series diverges and `value` is only the partial sum.
    pub singular: bool,
}

/// `m(T) = Σ_{p odd ≤ p_max} (8/π²) e^{-T p²}` as printed.
pub fn ia_memory(t: f64, p_max: usize) -> SeriesValue {
    assert!(t >= 0.0, "age must be nonnegative");
    let mut sum = 0.0;
    let mut p = p_max - (1 - p_max % 2);
    // smallest terms first
    loop {
        let pf = p as f64;
        sum += (-t * pf * pf).exp();
        if p == 1 {
            break;
        }
        p -= 2;
    }
    SeriesValue { value: 8.0 / (PI * PI) * sum, singular: t == 0.0 }
}

fn theta(a: f64) -> f64 {
    let mut s = 1.0;
    let mut k = 1.0_f64;
    loop {
        let term = (-a * k * k).exp();
        s += 2.0 * term;
        if term < 1e-18 {
            return s;
        }
        k += 1.0;
    }
}

/// `Σ_{p odd > 0} e^{-T p²}` through the Jacobi theta transform.
fn odd_sum_resummed(t: f64) -> f64 {
    0.5 * ((PI / t).sqrt() * theta(PI * PI / t) - (PI / (4.0 * t)).sqrt() * theta(PI * PI / (4.0 * t)))
}

/// Accurate evaluator of the IA memory and its survival function.
///
/// Uses the truncated series wherever its tail is below rounding
/// (`T p_max² ≥ 40`) and the theta resummation closer to `T = 0`, where
/// any fixed truncation under-resolves the integrable singularity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IaMemory {
    p_max: usize,
}

impl IaMemory {
    pub fn new(p_max: usize) -> Self {
        assert!(p_max >= 1 && p_max % 2 == 1, "p_max must be odd");
        Self { p_max }
    }

    pub fn p_max(&self) -> usize {
        self.p_max
    }

    fn split(&self) -> f64 {
        40.0 / (self.p_max as f64).powi(2)
    }

    /// `m(T)`; at `T = 0` the truncated partial sum.
    pub fn eval(&self, t: f64) -> f64 {
        if t == 0.0 {
            ia_memory(0.0, self.p_max).value
        } else if t >= self.split() {
            let mut sum = 0.0;
            let mut p = 1.0_f64;
            while p <= self.p_max as f64 {
                let term = (-t * p * p).exp();
                sum += term;
                if term < 1e-18 * sum {
                    break;
                }
                p += 2.0;
            }
            8.0 / (PI * PI) * sum
        } else {
            8.0 / (PI * PI) * odd_sum_resummed(t)
        }
    }

    /// `∫_T^∞ m = Σ_{p odd} (8/π²p²) e^{-T p²}`, with `survival(0) = 1`.
    pub fn survival(&self, t: f64) -> f64 {
        let split = self.split();
        let series = |t: f64| {
            let mut sum = 0.0;
            let mut p = self.p_max as f64;
            while p >= 1.0 {
                sum += (-t * p * p).exp() / (p * p);
                p -= 2.0;
            }
            8.0 / (PI * PI) * sum
        };
        if t >= split {
            return series(t);
        }
        // ∫_t^split m under T = u²
        let (a, b) = (t.sqrt(), split.sqrt());
        let r = integrate(|u| 2.0 * u * self.eval_pos(u * u), a, b, 1e-15, 1e-14)
            .expect("smooth integrand");
        series(split) + r.value
    }

    fn eval_pos(&self, t: f64) -> f64 {
        if t == 0.0 {
            // lim_{T→0} 2u m(u²) for T = u²
            return 0.0;
        }
        self.eval(t)
    }

    /// `u ↦ 2u m(u²)`: the memory under the substitution `T = u²`, finite at 0.
    pub fn substituted(&self, u: f64) -> f64 {
        if u == 0.0 {
            // 2u m(u²) → 2u (2/π²)√π/u
            return 4.0 / PI.powf(1.5);
        }
        2.0 * u * self.eval(u * u)
    }

    /// Product-integration weights `W_j = ∫ m(T) φ_j(T) dT` for the hat
    /// functions `φ_j` of a uniform age grid, truncated at `T_max`.
    pub fn hat_weights(&self, age: &AgeGrid) -> Vec<f64> {
        let h = age.dt_age;
        let n = age.n_t;
        // ∫ over [T_i, T_{i+1}] of m·(T - T_i)/h and m·(T_{i+1} - T)/h
        let pieces: Vec<(f64, f64)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let (a, b) = (age.age(i), age.age(i + 1));
                let (ua, ub) = (a.sqrt(), b.sqrt());
                let up = integrate(|u| self.substituted(u) * (u * u - a) / h, ua, ub, 1e-16, 1e-13)
                    .expect("smooth integrand")
                    .value;
                let down = integrate(|u| self.substituted(u) * (b - u * u) / h, ua, ub, 1e-16, 1e-13)
                    .expect("smooth integrand")
                    .value;
                (down, up)
            })
            .collect();
        let mut w = vec![0.0; n + 1];
        for (i, (down, up)) in pieces.into_iter().enumerate() {
            w[i] += down;
            w[i + 1] += up;
        }
        w
    }
}

// ---------------------------------------------------------------------------
// kernel field

/// `K` on `(age slice j, cell c, arc node k)`, stored with `k` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelField {
    grid: PeriodicGrid,
    arc: ArcGrid,
    age: AgeGrid,
    values: Vec<f64>,
}

impl KernelField {
    /// Build from a per-age arc-length profile shared by every cell.
    pub fn from_age_profiles(
        grid: PeriodicGrid,
        arc: ArcGrid,
        age: AgeGrid,
        profile: impl Fn(usize) -> Vec<f64>,
    ) -> Self {
        let nodes = arc.nodes();
        let mut values = Vec::with_capacity(age.slices() * grid.cells() * nodes);
        for j in 0..age.slices() {
            let line = profile(j);
            assert_eq!(line.len(), nodes);
            for _ in 0..grid.cells() {
                values.extend_from_slice(&line);
            }
        }
        Self { grid, arc, age, values }
    }

    pub fn from_values(grid: PeriodicGrid, arc: ArcGrid, age: AgeGrid, values: Vec<f64>) -> Result<Self, KernelError> {
        let expected = age.slices() * grid.cells() * arc.nodes();
        if values.len() != expected {
            return Err(KernelError::Shape { expected, got: values.len() });
        }
        Ok(Self { grid, arc, age, values })
    }

    /// No memory at all: the inflow profile at every age.
    pub fn zero_memory(grid: PeriodicGrid, arc: ArcGrid, age: AgeGrid) -> Self {
        let e = arc.inflow_profile();
        Self::from_age_profiles(grid, arc, age, |_| e.clone())
    }

    /// Fixed point of the discrete scheme at rest: `K_j = (I - ΔT D₂)^{-j} e`.
    pub fn quiescent(grid: PeriodicGrid, arc: ArcGrid, age: AgeGrid) -> Self {
        let solver = DiffusionSolver::new(&arc, age.dt_age);
        let mut lines = vec![arc.inflow_profile()];
        for j in 1..age.slices() {
            let mut l = lines[j - 1].clone();
            solver.solve(&mut l);
            lines.push(l);
        }
        Self::from_age_profiles(grid, arc, age, |j| lines[j].clone())
    }

    /// A kernel whose memory is nonnegative and nonincreasing in age:
    /// `m_1 = (e - A^{-1}e)/ΔT`, `m_j = q^{j-1} m_1`, with `q = min(1/2, min A^{-1}e)`.
    /// Returns the field and `q`.
    pub fn geometric(grid: PeriodicGrid, arc: ArcGrid, age: AgeGrid) -> (Self, f64) {
        let solver = DiffusionSolver::new(&arc, age.dt_age);
        let e = arc.inflow_profile();
        let mut ae = e.clone();
        solver.solve(&mut ae);
        let q = ae[1..arc.intervals].iter().fold(0.5_f64, |m, &v| m.min(v));
        let b: Vec<f64> = e.iter().zip(&ae).map(|(a, c)| a - c).collect();
        let mut lines = vec![e.clone()];
        let mut geo = 0.0;
        for j in 1..age.slices() {
            geo += q.powi(j as i32 - 1);
            lines.push(e.iter().zip(&b).map(|(e, b)| (e - b * geo).max(0.0)).collect());
        }
        (Self::from_age_profiles(grid, arc, age, |j| lines[j].clone()), q)
    }

    /// `K_j = ∫_{T_j}^∞ m_IA` inside the chain, `0` at its ends.
    pub fn ia_equilibrium(grid: PeriodicGrid, arc: ArcGrid, age: AgeGrid, ia: &IaMemory) -> Self {
        let e = arc.inflow_profile();
        let surv: Vec<f64> = (0..age.slices()).map(|j| if j == 0 { 1.0 } else { ia.survival(age.age(j)) }).collect();
        Self::from_age_profiles(grid, arc, age, |j| e.iter().map(|v| v * surv[j]).collect())
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn arc(&self) -> &ArcGrid {
        &self.arc
    }

    pub fn age(&self) -> &AgeGrid {
        &self.age
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slice_len(&self) -> usize {
        self.grid.cells() * self.arc.nodes()
    }

    pub fn slice(&self, j: usize) -> &[f64] {
        let l = self.slice_len();
        &self.values[j * l..(j + 1) * l]
    }

    pub fn index(&self, j: usize, c: usize, k: usize) -> usize {
        (j * self.grid.cells() + c) * self.arc.nodes() + k
    }

    pub fn get(&self, j: usize, c: usize, k: usize) -> f64 {
        self.values[self.index(j, c, k)]
    }

    /// `m_j = (K_{j-1} - K_j)/ΔT` for `j ≥ 1`, `m_0 = 0`.
    pub fn memory_at(&self, j: usize, c: usize, k: usize) -> f64 {
        if j == 0 {
            return 0.0;
        }
        let l = self.slice_len();
        let i = self.index(j, c, k);
        (self.values[i - l] - self.values[i]) / self.age.dt_age
    }

    /// The whole memory field in the kernel layout.
    pub fn memory(&self) -> Vec<f64> {
        let l = self.slice_len();
        let inv = 1.0 / self.age.dt_age;
        let mut m = vec![0.0; self.values.len()];
        m[l..]
            .par_iter_mut()
            .enumerate()
            .for_each(|(i, out)| *out = (self.values[i] - self.values[i + l]) * inv);
        m
    }

    /// `(min K, max K)`.
    pub fn range(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Smallest memory value over `j ≥ 1` and where it sits.
    pub fn min_memory(&self) -> (f64, [usize; 3]) {
        let mut best = (f64::INFINITY, [0; 3]);
        let (cells, nodes) = (self.grid.cells(), self.arc.nodes());
        for j in 1..self.age.slices() {
            for c in 0..cells {
                for k in 0..nodes {
                    let m = self.memory_at(j, c, k);
                    if m < best.0 {
                        best = (m, [j, c, k]);
                    }
                }
            }
        }
        best
    }

    /// Largest `m_{j+1} - m_j` over age pairs with `j ≥ first` (and `j ≥ 1`).
    /// `NEG_INFINITY` when no pair is left.
    pub fn max_age_increase(&self, first: usize) -> (f64, [usize; 3]) {
        let (cells, nodes) = (self.grid.cells(), self.arc.nodes());
        let mut best = (f64::NEG_INFINITY, [0; 3]);
        for j in first.max(1)..self.age.n_t {
            for c in 0..cells {
                for k in 0..nodes {
                    let d = self.memory_at(j + 1, c, k) - self.memory_at(j, c, k);
                    if d > best.0 {
                        best = (d, [j, c, k]);
                    }
                }
            }
        }
        best
    }

    /// `max e^{μ(2We T_j - t)} m_j` over the whole field.
    pub fn decay_ratio(&self, t: f64, mu: f64, we: f64) -> f64 {
        let (cells, nodes) = (self.grid.cells(), self.arc.nodes());
        let mut best = 0.0_f64;
        for j in 1..self.age.slices() {
            let w = envelope(self.age.age(j), t, mu, we);
            let mut mx = 0.0_f64;
            for c in 0..cells {
                for k in 0..nodes {
                    mx = mx.max(self.memory_at(j, c, k));
                }
            }
            best = best.max(w * mx);
        }
        best
    }

    /// `max_{c,k} m_j` for every age slice.
    pub fn memory_profile_max(&self) -> Vec<f64> {
        let (cells, nodes) = (self.grid.cells(), self.arc.nodes());
        (0..self.age.slices())
            .map(|j| {
                let mut mx = 0.0_f64;
                for c in 0..cells {
                    for k in 0..nodes {
                        mx = mx.max(self.memory_at(j, c, k));
                    }
                }
                mx
            })
            .collect()
    }
}

/// One-pass summary of a kernel field for the run monitors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelStats {
    pub min: f64,
    pub max: f64,
    pub min_memory: f64,
    /// `max (m_{j+1} - m_j)` over age pairs `j ≥ first`; `NEG_INFINITY` if none.
    pub max_age_increase: f64,
    /// `max_j e^{2 We μ T_j} max_{x,s} m_j`; the decay ratio is this times `e^{-μt}`.
    pub envelope_constant: f64,
}

impl KernelField {
    pub fn stats(&self, first: usize, mu: f64, we: f64) -> KernelStats {
        let (cells, nodes) = (self.grid.cells(), self.arc.nodes());
        let l = self.slice_len();
        let inv = 1.0 / self.age.dt_age;
        let n_t = self.age.n_t;
        let first = first.max(1);
        let v = &self.values;
        let per: Vec<(f64, f64, f64, f64, f64)> = (0..self.age.slices())
            .into_par_iter()
            .map(|j| {
                let cur = &v[j * l..(j + 1) * l];
                let (lo, hi) = cur.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
                if j == 0 {
                    return (lo, hi, f64::INFINITY, 0.0, f64::NEG_INFINITY);
                }
                let prev = &v[(j - 1) * l..j * l];
                let mut mmin = f64::INFINITY;
                let mut mmax = 0.0_f64;
                let mut inc = f64::NEG_INFINITY;
                let next = (j >= first && j < n_t).then(|| &v[(j + 1) * l..(j + 2) * l]);
                for i in 0..cells * nodes {
                    let m = (prev[i] - cur[i]) * inv;
                    mmin = mmin.min(m);
                    mmax = mmax.max(m);
                    if let Some(nx) = next {
                        inc = inc.max((cur[i] - nx[i]) * inv - m);
                    }
                }
                (lo, hi, mmin, envelope(self.age.age(j), 0.0, mu, we) * mmax, inc)
            })
            .collect();
        per.into_iter().fold(
            KernelStats {
                min: f64::INFINITY,
                max: f64::NEG_INFINITY,
                min_memory: f64::INFINITY,
                max_age_increase: f64::NEG_INFINITY,
                envelope_constant: 0.0,
            },
            |s, (lo, hi, mmin, env, inc)| KernelStats {
                min: s.min.min(lo),
                max: s.max.max(hi),
                min_memory: s.min_memory.min(mmin),
                max_age_increase: s.max_age_increase.max(inc),
                envelope_constant: s.envelope_constant.max(env),
            },
        )
    }
}

// ---------------------------------------------------------------------------
// time stepping

/// Prefactored Thomas solver for `(I - ΔT D₂) x = b` on the interior arc
/// nodes with homogeneous Dirichlet ends.
#[derive(Debug, Clone)]
pub struct DiffusionSolver {
    r: f64,
    cp: Vec<f64>,
    inv_den: Vec<f64>,
}

impl DiffusionSolver {
    pub fn new(arc: &ArcGrid, dt_age: f64) -> Self {
        let m = arc.intervals - 1;
        let r = dt_age / (arc.ds() * arc.ds());
        let (a, b, c) = (-r, 1.0 + 2.0 * r, -r);
        let mut cp = vec![0.0; m];
        let mut inv_den = vec![0.0; m];
        for i in 0..m {
            let den = if i == 0 { b } else { b - a * cp[i - 1] };
            inv_den[i] = 1.0 / den;
            cp[i] = c / den;
        }
        Self { r, cp, inv_den }
    }

    /// In-place solve on a full line of `intervals + 1` nodes; the end
    /// values are forced to zero.
    pub fn solve(&self, line: &mut [f64]) {
        let m = self.cp.len();
        let a = -self.r;
        let n = line.len() - 1;
        line[0] = 0.0;
        line[n] = 0.0;
        let x = &mut line[1..n];
        x[0] *= self.inv_den[0];
        for i in 1..m {
            x[i] = (x[i] - a * x[i - 1]) * self.inv_den[i];
        }
        for i in (0..m - 1).rev() {
            x[i] -= self.cp[i] * x[i + 1];
        }
    }
}

/// First-order upwind step `K ← K - λ g ∂_s K` on the interior, `λ = dt/Δs`.
fn upwind_line(line: &mut [f64], g: &[f64], lambda: f64, tmp: &mut [f64]) {
    let n = line.len() - 1;
    tmp.copy_from_slice(line);
    for k in 1..n {
        let c = lambda * g[k];
        line[k] = if c > 0.0 {
            tmp[k] - c * (tmp[k] - tmp[k - 1])
        } else {
            tmp[k] - c * (tmp[k + 1] - tmp[k])
        };
    }
}

/// Largest `dt` the kernel step accepts for the given transport fields.
pub fn admissible_dt(grid: &PeriodicGrid, arc: &ArcGrid, v: &[Vector<2>], g: &[f64]) -> f64 {
    let vmax = v.iter().fold(0.0_f64, |m, u| m.max(u.0[0].abs()).max(u.0[1].abs()));
    let gmax = g.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let a = if vmax > 0.0 { grid.dx() / vmax } else { f64::INFINITY };
    let b = if gmax > 0.0 { arc.ds() / gmax } else { f64::INFINITY };
    a.min(b)
}

/// Advance `K` by one time step `dt = We ΔT`.
///
/// `v` is the physical velocity per cell and `g` the drift in `[cell][node]`
/// layout.
pub fn step_kernel(
    kf: &mut KernelField,
    v: &[Vector<2>],
    g: &[f64],
    dt: f64,
    we: f64,
) -> Result<(), KernelError> {
    let (cells, nodes) = (kf.grid.cells(), kf.arc.nodes());
    if v.len() != cells {
        return Err(KernelError::Shape { expected: cells, got: v.len() });
    }
    if g.len() != cells * nodes {
        return Err(KernelError::Shape { expected: cells * nodes, got: g.len() });
    }
    let expected = we * kf.age.dt_age;
    if (dt - expected).abs() > 1e-12 * expected {
        return Err(KernelError::AgeMismatch { dt, expected });
    }
    let admissible = admissible_dt(&kf.grid, &kf.arc, v, g);
    if dt > admissible {
        return Err(KernelError::Cfl { dt, admissible });
    }

    let sl = kf.slice_len();
    // (i) age shift with inflow at T = 0; the oldest slice leaves the domain
    kf.values.rotate_right(sl);
    let e = kf.arc.inflow_profile();
    for c in 0..cells {
        kf.values[c * nodes..(c + 1) * nodes].copy_from_slice(&e);
    }

    let moving = v.iter().any(|u| u.0[0] != 0.0 || u.0[1] != 0.0);
    let stencils = moving.then(|| departure_stencils(&kf.grid, v, dt));
    let drifting = g.iter().any(|&x| x != 0.0);
    let lambda = dt / kf.arc.ds();
    let solver = DiffusionSolver::new(&kf.arc, kf.age.dt_age);

    kf.values[sl..].par_chunks_mut(sl).for_each_init(
        || (vec![0.0; sl], vec![0.0; nodes]),
        |(scratch, tmp), slice| {
            // (ii) semi-Lagrangian advection in x
            if let Some(st) = &stencils {
                scratch.copy_from_slice(slice);
                for (c, s) in st.iter().enumerate() {
                    let out = &mut slice[c * nodes..(c + 1) * nodes];
                    let src = s.idx.map(|i| &scratch[i * nodes..(i + 1) * nodes]);
                    for k in 0..nodes {
                        out[k] = s.w[0] * src[0][k] + s.w[1] * src[1][k] + s.w[2] * src[2][k] + s.w[3] * src[3][k];
                    }
                }
            }
            for c in 0..cells {
                let line = &mut slice[c * nodes..(c + 1) * nodes];
                // (iii) upwind transport in s
                if drifting {
                    upwind_line(line, &g[c * nodes..(c + 1) * nodes], lambda, tmp);
                }
                // (iv) implicit diffusion in s
                solver.solve(line);
            }
        },
    );
    Ok(())
}

/// `g(x, s) = ∇v(x) : ∫₀ˢ S(x, s′) ds′` by cumulative trapezoid from the
/// chain centre. `s_field` uses the `[cell][node]` layout.
pub fn compute_drift(grad_v: &[Tensor2<2>], s_field: &[Tensor2<2>], arc: &ArcGrid) -> Vec<f64> {
    let nodes = arc.nodes();
    let mid = arc.centre();
    let h = 0.5 * arc.ds();
    let mut g = vec![0.0; grad_v.len() * nodes];
    g.par_chunks_mut(nodes).enumerate().for_each(|(c, out)| {
        let s = &s_field[c * nodes..(c + 1) * nodes];
        let gv = grad_v[c];
        let mut acc = Tensor2::zero();
        for k in mid + 1..nodes {
            acc += (s[k - 1] + s[k]) * h;
            out[k] = gv.double_dot(&acc);
        }
        let mut acc = Tensor2::zero();
        for k in (0..mid).rev() {
            acc -= (s[k] + s[k + 1]) * h;
            out[k] = gv.double_dot(&acc);
        }
        out[mid] = 0.0;
    });
    g
}

// ---------------------------------------------------------------------------
// validation

/// `e^{μ(2We T - t)}`.
pub fn envelope(age: f64, t: f64, mu: f64, we: f64) -> f64 {
    (mu * (2.0 * we * age - t)).exp()
}

/// Measured exponential decay of `K₀`'s memory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    /// `sup m₀ e^{2 We μ T}` for the requested `μ`.
    pub c0: f64,
    /// Largest `μ` consistent with the decay rate of the oldest ages.
    pub mu_admissible: f64,
}

/// `C₀ = sup m₀ e^{2 We μ T}` and the admissible `μ` from the tail rate.
pub fn fit_decay(k0: &KernelField, mu: f64, we: f64) -> DecayFit {
    let prof = k0.memory_profile_max();
    let age = k0.age;
    let c0 = prof
        .iter()
        .enumerate()
        .fold(0.0_f64, |m, (j, &v)| m.max(envelope(age.age(j), 0.0, mu, we) * v));
    let (a, b) = ((age.n_t / 2).max(1), age.n_t);
    let mu_admissible = if a >= b || prof[a] <= 0.0 || prof[b] <= 0.0 {
        f64::INFINITY
    } else {
        let rate = (prof[a].ln() - prof[b].ln()) / (age.age(b) - age.age(a));
        rate.max(0.0) / (2.0 * we)
    };
    DecayFit { c0, mu_admissible }
}

/// Checks on an initial kernel: positivity of memory, monotone memory,
/// zero chain-end values, exponential decay with rate `2 We μ`.
pub fn validate_initial_kernel(k0: &KernelField, mu: f64, we: f64) -> Report {
    let mut r = Report::default();
    let (mmin, at) = k0.min_memory();
    r.push(
        Check::new("memory_nonnegative", mmin >= -EPS_MONO, mmin, "m0 >= 0").at(at.to_vec()),
    );
    let (inc, at) = k0.max_age_increase(1);
    let inc = inc.max(0.0);
    r.push(
        Check::new("memory_nonincreasing", inc <= EPS_MONO, inc, "d_T m0 <= 0")
            .at(at.to_vec())
            .warning(),
    );
    let n = k0.arc.intervals;
    let mut worst = (0.0_f64, [0usize; 3]);
    for j in 0..k0.age.slices() {
        for c in 0..k0.grid.cells() {
            for k in [0, n] {
                let v = k0.get(j, c, k).abs();
                if v > worst.0 {
                    worst = (v, [j, c, k]);
                }
            }
        }
    }
    r.push(Check::new("chain_ends_zero", worst.0 == 0.0, worst.0, "K0(s=±1/2) = 0").at(worst.1.to_vec()));
    let fit = fit_decay(k0, mu, we);
    let ok = mu <= fit.mu_admissible * (1.0 + 1e-9);
    r.push(Check::new(
        "memory_decay",
        ok,
        fit.c0,
        format!("C0 = {:.6e}, mu = {mu}, admissible mu = {:.6e}", fit.c0, fit.mu_admissible),
    ));
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate;

    fn small() -> (PeriodicGrid, ArcGrid, AgeGrid) {
        (PeriodicGrid::new(4, 2.0 * PI), ArcGrid::new(16), AgeGrid::new(40, 0.01))
    }

    #[test]
    fn ia_memory_normalization() {
        let ia = IaMemory::new(1999);
        let r = integrate(|u| ia.substituted(u), 0.0, 50f64.sqrt(), 1e-14, 1e-13).unwrap();
        assert!((r.value - 1.0).abs() < 1e-8, "{}", r.value);
        // closed form Σ_{p odd} 1/p² = π²/8
        let s: f64 = (0..2_000_000).map(|i| 1.0 / ((2 * i + 1) as f64).powi(2)).sum();
        assert!((s - PI * PI / 8.0).abs() < 1e-6);
        assert!((ia.survival(0.0) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn truncated_series_alone_misses_normalization() {
        // ∫ of the p ≤ 1999 series is Σ 8/(π²p²) over retained terms
        let retained: f64 = (0..1000).map(|i| 8.0 / (PI * PI * ((2 * i + 1) as f64).powi(2))).sum();
        assert!((1.0 - retained) > 1e-4);
    }

    #[test]
    fn resummation_agrees_with_series() {
        let ia = IaMemory::new(1999);
        for &t in &[1e-3, 1e-2, 0.1, 0.5, 1.0] {
            let direct = ia_memory(t, 1999).value;
            let res = 8.0 / (PI * PI) * odd_sum_resummed(t);
            assert!((direct - res).abs() < 1e-12 * direct, "{t}");
            assert!((ia.eval(t) - direct).abs() < 1e-12 * direct);
        }
    }

    #[test]
    fn ia_memory_shape() {
        let z = ia_memory(0.0, 1999);
        assert!(z.singular);
        assert!((z.value - 8.0 / (PI * PI) * 1000.0).abs() < 1e-9);
        assert!(!ia_memory(0.1, 1999).singular);
        let mut prev = f64::INFINITY;
        for i in 0..200 {
            let m = ia_memory(0.01 + 0.05 * i as f64, 1999).value;
            assert!(m < prev);
            prev = m;
        }
        for &t in &[6.0_f64, 8.0, 12.0] {
            let lead = 8.0 / (PI * PI) * (-t).exp();
            assert!((ia_memory(t, 1999).value - lead).abs() < 0.01 * lead);
        }
    }

    #[test]
    fn survival_is_integral_of_memory() {
        let ia = IaMemory::new(1999);
        for &t in &[1e-6, 1e-3, 0.05, 0.7, 3.0] {
            let tail = integrate(|x| ia.eval(x), t, 60.0, 1e-15, 1e-13).unwrap().value;
            assert!((ia.survival(t) - tail).abs() < 1e-10, "{t}");
        }
    }

    #[test]
    fn hat_weights_integrate_memory() {
        let ia = IaMemory::new(1999);
        let age = AgeGrid::new(100, 0.05);
        let w = ia.hat_weights(&age);
        let total: f64 = w.iter().sum();
        assert!((total - (1.0 - ia.survival(age.t_max()))).abs() < 1e-10);
        // linear test function T
        let first: f64 = w.iter().enumerate().map(|(j, w)| w * age.age(j)).sum();
        let exact = integrate(|u| ia.substituted(u) * u * u, 0.0, age.t_max().sqrt(), 1e-15, 1e-13).unwrap().value;
        assert!((first - exact).abs() < 1e-10);
    }

    #[test]
    fn quiescent_kernel_properties() {
        let (g, a, t) = small();
        let k = KernelField::quiescent(g, a, t);
        let (lo, hi) = k.range();
        assert!(lo >= 0.0 && hi <= 1.0);
        assert!(k.min_memory().0 >= 0.0);
        let rep = validate_initial_kernel(&k, 1.0, 1.0);
        assert!(rep.passed(), "{rep}");
        // the slowest heat mode decays at ≈ π² in age
        let fit = fit_decay(&k, 1.0, 1.0);
        assert!((2.0 * fit.mu_admissible - PI * PI).abs() < 0.1 * PI * PI, "{fit:?}");
    }

    #[test]
    fn rest_is_a_fixed_point() {
        let (g, a, t) = small();
        let k0 = KernelField::quiescent(g, a, t);
        let mut k = k0.clone();
        let v = vec![Vector::new(0.0, 0.0); g.cells()];
        let drift = vec![0.0; g.cells() * a.nodes()];
        for _ in 0..50 {
            step_kernel(&mut k, &v, &drift, 0.01, 1.0).unwrap();
        }
        assert_eq!(k, k0);
    }

    #[test]
    fn zero_memory_kernel_validates_with_zero_constant() {
        let (g, a, t) = small();
        let k = KernelField::zero_memory(g, a, t);
        let rep = validate_initial_kernel(&k, 3.0, 1.0);
        assert!(rep.passed(), "{rep}");
        assert_eq!(rep.get("memory_decay").unwrap().worst, 0.0);
    }

    #[test]
    fn negative_memory_rejected() {
        let (g, a, t) = small();
        let e = a.inflow_profile();
        let k = KernelField::from_age_profiles(g, a, t, |j| e.iter().map(|v| v * (0.5 + 0.01 * j as f64).min(1.0)).collect());
        let rep = validate_initial_kernel(&k, 1.0, 1.0);
        assert!(!rep.get("memory_nonnegative").unwrap().passed);
        assert!(!rep.passed());
    }

    #[test]
    fn excessive_decay_rate_rejected() {
        let (g, a, t) = small();
        let k = KernelField::quiescent(g, a, t);
        let rep = validate_initial_kernel(&k, 50.0, 1.0);
        let c = rep.get("memory_decay").unwrap();
        assert!(!c.passed, "{rep}");
    }

    #[test]
    fn geometric_kernel_is_monotone() {
        let (g, a, t) = small();
        let (k, q) = KernelField::geometric(g, a, t);
        assert!(q > 0.0 && q <= 0.5);
        let rep = validate_initial_kernel(&k, 1.0, 1.0);
        assert!(rep.passed() && rep.checks.iter().all(|c| c.passed), "{rep}");
    }

    #[test]
    fn ia_equilibrium_memory_is_cell_average_of_series() {
        let (g, a, _) = small();
        let age = AgeGrid::new(50, 0.02);
        let ia = IaMemory::new(1999);
        let k = KernelField::ia_equilibrium(g, a, age, &ia);
        for j in 1..age.slices() {
            let (lo, hi) = (age.age(j - 1), age.age(j));
            let avg = integrate(|u| ia.substituted(u), lo.sqrt(), hi.sqrt(), 1e-15, 1e-13).unwrap().value / age.dt_age;
            assert!((k.memory_at(j, 0, a.centre()) - avg).abs() < 1e-8 * avg.max(1.0));
        }
        assert_eq!(k.memory_at(3, 1, 0), 0.0);
        let rep = validate_initial_kernel(&k, 0.5, 1.0);
        assert!(rep.checks.iter().all(|c| c.passed), "{rep}");
    }

    #[test]
    fn linear_kernel_has_constant_memory() {
        let (g, a, t) = small();
        let e = a.inflow_profile();
        let k = KernelField::from_age_profiles(g, a, t, |j| e.iter().map(|v| v * (1.0 - 0.3 * t.age(j))).collect());
        for j in 1..t.slices() {
            assert!((k.memory_at(j, 2, 5) - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn drift_shape() {
        let a = ArcGrid::new(16);
        let nodes = a.nodes();
        let gv = vec![Tensor2::new(0.0, 0.7, 0.1, 0.0)];
        assert!(compute_drift(&[Tensor2::zero()], &vec![Tensor2::identity(); nodes], &a).iter().all(|&x| x == 0.0));
        let s0 = Tensor2::new(0.3, -0.2, -0.2, -0.3);
        let g = compute_drift(&gv, &vec![s0; nodes], &a);
        let slope = gv[0].double_dot(&s0);
        for k in 0..nodes {
            assert!((g[k] - slope * a.s(k)).abs() < 1e-15);
        }
        assert_eq!(g[a.centre()], 0.0);
    }

    #[test]
    fn drift_pointwise_bound() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(20);
        let a = ArcGrid::new(32);
        let nodes = a.nodes();
        for _ in 0..50 {
            let gv = Tensor2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let s: Vec<_> = (0..nodes)
                .map(|_| {
                    let d = rng.gen_range(-0.8..0.8);
                    let o = rng.gen_range(-0.8..0.8);
                    Tensor2::new(d, o, o, -d)
                })
                .collect();
            let smax = s.iter().fold(0.0_f64, |m, t| m.max(t.frobenius()));
            let g = compute_drift(&[gv], &s, &a);
            for k in 0..nodes {
                assert!(g[k].abs() <= gv.frobenius() * smax * a.s(k).abs() + 1e-14);
            }
        }
    }

    #[test]
    fn heat_mode_decay_rate() {
        let a = ArcGrid::new(64);
        let dt = 1e-3;
        let solver = DiffusionSolver::new(&a, dt);
        let mut line: Vec<f64> = (0..a.nodes()).map(|k| (PI * (a.s(k) + 0.5)).sin()).collect();
        line[0] = 0.0;
        line[64] = 0.0;
        let c = a.centre();
        let before = line[c];
        let steps = 100;
        for _ in 0..steps {
            solver.solve(&mut line);
        }
        let rate = (before / line[c]).ln() / (steps as f64 * dt);
        // backward Euler rate ln(1 + dt λ_h)/dt with λ_h = π² + O(Δs²)
        assert!((rate - PI * PI).abs() < 0.05 * PI * PI, "{rate}");
        let lam_h = 4.0 / (a.ds() * a.ds()) * (PI * a.ds() / 2.0).sin().powi(2);
        assert!((rate - (1.0 + dt * lam_h).ln() / dt).abs() < 1e-8);
    }

    #[test]
    fn courant_one_drift_without_diffusion_is_exact_shift() {
        let grid = PeriodicGrid::new(4, 2.0 * PI);
        let a = ArcGrid::new(32);
        let we = 1e12;
        let dt = 0.01;
        let age = AgeGrid::new(3, dt / we);
        let prof: Vec<f64> = (0..a.nodes()).map(|k| if (10..14).contains(&k) { 0.5 } else { 0.0 }).collect();
        let mut k = KernelField::from_age_profiles(grid, a, age, |_| prof.clone());
        let gval = a.ds() / dt;
        let g = vec![gval; grid.cells() * a.nodes()];
        let v = vec![Vector::new(0.0, 0.0); grid.cells()];
        step_kernel(&mut k, &v, &g, dt, we).unwrap();
        for kk in 1..a.intervals {
            let expect = prof[kk - 1];
            assert!((k.get(2, 1, kk) - expect).abs() < 1e-6, "{kk}");
        }
    }

    #[test]
    fn step_errors() {
        let (g, a, t) = small();
        let mut k = KernelField::quiescent(g, a, t);
        let v = vec![Vector::new(0.0, 0.0); g.cells()];
        let drift = vec![0.0; g.cells() * a.nodes()];
        assert!(matches!(step_kernel(&mut k, &v, &drift, 0.02, 1.0), Err(KernelError::AgeMismatch { .. })));
        let big = vec![1000.0; g.cells() * a.nodes()];
        assert!(matches!(step_kernel(&mut k, &v, &big, 0.01, 1.0), Err(KernelError::Cfl { .. })));
    }

    #[test]
    fn max_principle_under_random_transport() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let grid = PeriodicGrid::new(8, 2.0 * PI);
        let a = ArcGrid::new(16);
        let age = AgeGrid::new(30, 0.01);
        let mut k = KernelField::quiescent(grid, a, age);
        let (lo0, hi0) = k.range();
        let (lo, hi) = (lo0.min(1.0), hi0.max(1.0));
        for _ in 0..40 {
            let v: Vec<_> = (0..grid.cells()).map(|_| Vector::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let g: Vec<_> = (0..grid.cells() * a.nodes()).map(|_| rng.gen_range(-3.0..3.0)).collect();
            step_kernel(&mut k, &v, &g, 0.01, 1.0).unwrap();
            let (l, h) = k.range();
            assert!(l >= lo - 1e-12 && h <= hi + 1e-12);
            assert!(k.min_memory().0 >= -EPS_MONO);
        }
    }

    #[test]
    fn monotone_memory_preserved_on_domain_of_dependence() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(22);
        let grid = PeriodicGrid::new(8, 2.0 * PI);
        let a = ArcGrid::new(16);
        let age = AgeGrid::new(30, 0.01);
        let (mut k, _) = KernelField::geometric(grid, a, age);
        for n in 1..=20 {
            let v: Vec<_> = (0..grid.cells()).map(|_| Vector::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let g: Vec<_> = (0..grid.cells() * a.nodes()).map(|_| rng.gen_range(-3.0..3.0)).collect();
            step_kernel(&mut k, &v, &g, 0.01, 1.0).unwrap();
            let (inc, _) = k.max_age_increase(n + 1);
            assert!(inc <= EPS_MONO, "step {n}: {inc}");
        }
    }

    #[test]
    fn decay_ratio_at_start_is_c0() {
        let (g, a, t) = small();
        let k = KernelField::quiescent(g, a, t);
        let fit = fit_decay(&k, 1.0, 1.0);
        assert_eq!(k.decay_ratio(0.0, 1.0, 1.0), fit.c0);
    }

    #[test]
    fn one_pass_stats_agree_with_individual_monitors() {
        let (g, a, t) = small();
        let (k, _) = KernelField::geometric(g, a, t);
        let st = k.stats(3, 0.7, 1.3);
        assert_eq!((st.min, st.max), k.range());
        assert_eq!(st.min_memory, k.min_memory().0);
        assert_eq!(st.max_age_increase, k.max_age_increase(3).0);
        let r = k.decay_ratio(0.4, 0.7, 1.3);
        assert!((st.envelope_constant * (-0.7_f64 * 0.4).exp() - r).abs() < 1e-14 * r);
    }
}
