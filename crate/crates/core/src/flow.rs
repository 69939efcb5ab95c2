//! Pseudo-spectral incompressible flow on the periodic square:
//!
//! ```text
//! Re (∂_t v + v·∇v) + ∇p - (1-ω) Δv = div σ,    div v = 0
//! ```
//!
//! Viscosity is integrated exactly by an integrating factor, advection and
//! forcing by second-order Adams–Bashforth (Euler on the first step).
//! The velocity is held as dealiased, Leray-projected Fourier coefficients.

use crate::spectral::Spectral;
use crate::tensor::{Tensor2, Vector};
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

/// Largest `dt max|v| / Δx` accepted by a step.
pub const FLOW_CFL: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("time step {dt} violates the CFL condition; admissible dt <= {admissible}")]
    Cfl { dt: f64, admissible: f64 },
    #[error("viscosity ratio omega = {0} outside (0, 1)")]
    Omega(f64),
    #[error("Reynolds number {0} must be positive")]
    Reynolds(f64),
    #[error("field length mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
}

type Modes = [Vec<Complex64>; 2];

fn zero_modes(n: usize) -> Modes {
    [vec![Complex64::new(0.0, 0.0); n], vec![Complex64::new(0.0, 0.0); n]]
}

/// Divergence-free velocity as Fourier coefficients (unnormalized forward
/// transform of the physical field).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralVelocity {
    hat: Modes,
}

impl SpectralVelocity {
    pub fn zero(sp: &Spectral) -> Self {
        Self { hat: zero_modes(sp.grid().cells()) }
    }

    /// Transform, dealias and project a physical field.
    pub fn from_physical(sp: &Spectral, v: &[Vector<2>]) -> Self {
        let mut hat = [0, 1].map(|i| sp.forward(&v.iter().map(|u| u.0[i]).collect::<Vec<_>>()));
        sp.dealias(&mut hat[0]);
        sp.dealias(&mut hat[1]);
        project_modes(sp, &mut hat);
        Self { hat }
    }

    pub fn modes(&self) -> &[Vec<Complex64>; 2] {
        &self.hat
    }

    pub fn to_physical(&self, sp: &Spectral) -> Vec<Vector<2>> {
        let a = sp.inverse(&self.hat[0]);
        let b = sp.inverse(&self.hat[1]);
        a.into_iter().zip(b).map(|(x, y)| Vector::new(x, y)).collect()
    }

    /// `max_k |k·v̂(k)| / max_k |v̂(k)|` (zero for the rest state).
    pub fn divergence_residual(&self, sp: &Spectral) -> f64 {
        let mut div = 0.0_f64;
        let mut size = 0.0_f64;
        for c in 0..sp.grid().cells() {
            let (kx, ky) = sp.wavevector(c);
            let (a, b) = (self.hat[0][c], self.hat[1][c]);
            div = div.max((a * kx + b * ky).norm());
            size = size.max((a.norm_sqr() + b.norm_sqr()).sqrt() * (kx * kx + ky * ky).sqrt());
        }
        if size == 0.0 {
            0.0
        } else {
            div / size
        }
    }

    /// Largest energy fraction sitting in modes the 2/3 rule removes.
    pub fn aliased_energy(&self, sp: &Spectral) -> f64 {
        let mut out = 0.0;
        let mut total = 0.0;
        for c in 0..sp.grid().cells() {
            let e = self.hat[0][c].norm_sqr() + self.hat[1][c].norm_sqr();
            total += e;
            if !sp.kept(c) {
                out += e;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            out / total
        }
    }

    /// `½ ∫ |v|²` over the torus, by Parseval.
    pub fn energy(&self, sp: &Spectral) -> f64 {
        let g = sp.grid();
        let n2 = g.cells() as f64;
        let s: f64 = self.hat.iter().flat_map(|h| h.iter()).map(|z| z.norm_sqr()).sum();
        0.5 * s / (n2 * n2) * g.length * g.length
    }

    /// `∫ |∇v|²`, the dissipation integral.
    pub fn dissipation(&self, sp: &Spectral) -> f64 {
        let g = sp.grid();
        let n2 = g.cells() as f64;
        let s: f64 = (0..g.cells())
            .map(|c| sp.k2(c) * (self.hat[0][c].norm_sqr() + self.hat[1][c].norm_sqr()))
            .sum();
        s / (n2 * n2) * g.length * g.length
    }

    /// `½ ∫ (∂_x v_y - ∂_y v_x)²`.
    pub fn enstrophy(&self, sp: &Spectral) -> f64 {
        let g = sp.grid();
        let n2 = g.cells() as f64;
        let s: f64 = (0..g.cells())
            .map(|c| (sp.ik(c, 0) * self.hat[1][c] - sp.ik(c, 1) * self.hat[0][c]).norm_sqr())
            .sum();
        0.5 * s / (n2 * n2) * g.length * g.length
    }
}

/// Leray projection `v̂ ← (I - k kᵀ/|k|²) v̂`, mean mode untouched.
pub fn project_modes(sp: &Spectral, hat: &mut [Vec<Complex64>; 2]) {
    let [a, b] = hat;
    a.par_iter_mut().zip(b.par_iter_mut()).enumerate().for_each(|(c, (x, y))| {
        let (kx, ky) = sp.wavevector(c);
        let k2 = kx * kx + ky * ky;
        if k2 > 0.0 {
            let d = (*x * kx + *y * ky) / k2;
            *x -= d * kx;
            *y -= d * ky;
        }
    });
}

/// Divergence-free part of a physical field.
pub fn project_divfree(sp: &Spectral, u: &[Vector<2>]) -> SpectralVelocity {
    SpectralVelocity::from_physical(sp, u)
}

/// `(∇v)_ij = ∂_i v_j` per cell.
pub fn gradient(sp: &Spectral, v: &SpectralVelocity) -> Vec<Tensor2<2>> {
    let mut parts: Vec<Vec<f64>> = Vec::with_capacity(4);
    for i in 0..2 {
        for j in 0..2 {
            parts.push(sp.inverse(&sp.derivative(&v.hat[j], i)));
        }
    }
    (0..sp.grid().cells())
        .map(|c| Tensor2::new(parts[0][c], parts[1][c], parts[2][c], parts[3][c]))
        .collect()
}

/// `max_x |∇v(x)|`.
pub fn max_gradient(grad: &[Tensor2<2>]) -> f64 {
    grad.iter().fold(0.0_f64, |m, t| m.max(t.frobenius()))
}

/// Largest `dt` with `dt max|v_i| ≤ FLOW_CFL Δx`.
pub fn admissible_dt(sp: &Spectral, v: &[Vector<2>]) -> f64 {
    let vmax = v.iter().fold(0.0_f64, |m, u| m.max(u.0[0].abs()).max(u.0[1].abs()));
    if vmax > 0.0 {
        FLOW_CFL * sp.grid().dx() / vmax
    } else {
        f64::INFINITY
    }
}

/// Zero-mean pressure `p̂ = k_i k_j X̂_ij / |k|²`, `X = σ - Re v⊗v`.
pub fn pressure(sp: &Spectral, v: &SpectralVelocity, sigma: &[Tensor2<2>], re: f64) -> Vec<f64> {
    let u = v.to_physical(sp);
    let x: Vec<[f64; 3]> = u
        .iter()
        .zip(sigma)
        .map(|(u, s)| {
            [
                s.0[0][0] - re * u.0[0] * u.0[0],
                0.5 * (s.0[0][1] + s.0[1][0]) - re * u.0[0] * u.0[1],
                s.0[1][1] - re * u.0[1] * u.0[1],
            ]
        })
        .collect();
    let hats: Vec<Vec<Complex64>> = (0..3).map(|i| sp.forward(&x.iter().map(|r| r[i]).collect::<Vec<_>>())).collect();
    let p: Vec<Complex64> = (0..sp.grid().cells())
        .map(|c| {
            let (kx, ky) = sp.wavevector(c);
            let k2 = kx * kx + ky * ky;
            if k2 == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                (hats[0][c] * (kx * kx) + hats[1][c] * (2.0 * kx * ky) + hats[2][c] * (ky * ky)) / k2
            }
        })
        .collect();
    sp.inverse(&p)
}

/// Flow parameters: `Re` and the polymer viscosity fraction `ω`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowParams {
    pub reynolds: f64,
    pub omega: f64,
}

impl FlowParams {
    pub fn new(reynolds: f64, omega: f64) -> Result<Self, FlowError> {
        if !(reynolds > 0.0 && reynolds.is_finite()) {
            return Err(FlowError::Reynolds(reynolds));
        }
        if !(omega > 0.0 && omega < 1.0) {
            return Err(FlowError::Omega(omega));
        }
        Ok(Self { reynolds, omega })
    }

    /// Kinematic viscosity `(1-ω)/Re`.
    pub fn nu(&self) -> f64 {
        (1.0 - self.omega) / self.reynolds
    }
}

/// IF-AB2 stepper. Keeps the previous explicit tendency.
#[derive(Debug, Clone)]
pub struct FlowSolver {
    sp: Spectral,
    params: FlowParams,
    prev: Option<(Modes, f64)>,
}

impl FlowSolver {
    pub fn new(sp: Spectral, params: FlowParams) -> Self {
        Self { sp, params, prev: None }
    }

    pub fn spectral(&self) -> &Spectral {
        &self.sp
    }

    pub fn params(&self) -> &FlowParams {
        &self.params
    }

    /// Forget the stored tendency; the next step is Euler.
    pub fn reset(&mut self) {
        self.prev = None;
    }

    /// `P[-v·∇v + div σ / Re]`, dealiased.
    pub fn tendency(&self, v: &SpectralVelocity, u: &[Vector<2>], div_sigma: &[Vector<2>]) -> Modes {
        let sp = &self.sp;
        let grad = gradient(sp, v);
        let inv_re = 1.0 / self.params.reynolds;
        let rhs: Vec<Vector<2>> = u
            .par_iter()
            .zip(grad.par_iter())
            .zip(div_sigma.par_iter())
            .map(|((u, g), f)| {
                // (v·∇v)_j = v_i ∂_i v_j
                let adv = Vector::new(u.0[0] * g.0[0][0] + u.0[1] * g.0[1][0], u.0[0] * g.0[0][1] + u.0[1] * g.0[1][1]);
                Vector::new(f.0[0] * inv_re - adv.0[0], f.0[1] * inv_re - adv.0[1])
            })
            .collect();
        let mut hat = [0, 1].map(|i| sp.forward(&rhs.iter().map(|r| r.0[i]).collect::<Vec<_>>()));
        sp.dealias(&mut hat[0]);
        sp.dealias(&mut hat[1]);
        project_modes(sp, &mut hat);
        hat
    }

    /// Advance `v` by `dt` under the forcing `div σ`.
    pub fn step(&mut self, v: &mut SpectralVelocity, div_sigma: &[Vector<2>], dt: f64) -> Result<(), FlowError> {
        let cells = self.sp.grid().cells();
        if div_sigma.len() != cells {
            return Err(FlowError::Shape { expected: cells, got: div_sigma.len() });
        }
        let u = v.to_physical(&self.sp);
        let admissible = admissible_dt(&self.sp, &u);
        if dt > admissible {
            return Err(FlowError::Cfl { dt, admissible });
        }
        let n_now = self.tendency(v, &u, div_sigma);
        let nu = self.params.nu();
        let sp = &self.sp;
        let prev = self.prev.as_ref().filter(|(_, pdt)| *pdt == dt).map(|(m, _)| m);
        for i in 0..2 {
            v.hat[i].par_iter_mut().enumerate().for_each(|(c, z)| {
                let e = (-nu * sp.k2(c) * dt).exp();
                let inc = match prev {
                    Some(p) => (n_now[i][c] * 1.5 - p[i][c] * (0.5 * e)) * dt,
                    None => n_now[i][c] * dt,
                };
                *z = (*z + inc) * e;
            });
        }
        self.prev = Some((n_now, dt));
        Ok(())
    }

    /// Physical `∂_t v` residual of the momentum balance at the current
    /// state, given a finite-difference estimate `dvdt` of the time derivative.
    pub fn momentum_residual(&self, v: &SpectralVelocity, dvdt: &[Vector<2>], sigma: &[Tensor2<2>], div_sigma: &[Vector<2>]) -> f64 {
        let sp = &self.sp;
        let re = self.params.reynolds;
        let u = v.to_physical(sp);
        let grad = gradient(sp, v);
        let p = pressure(sp, v, sigma, re);
        let px = sp.derivative_real(&p, 0);
        let py = sp.derivative_real(&p, 1);
        let lap: Vec<Vec<f64>> = (0..2)
            .map(|j| {
                let h: Vec<Complex64> = (0..sp.grid().cells()).map(|c| -v.hat[j][c] * sp.k2(c)).collect();
                sp.inverse(&h)
            })
            .collect();
        let visc = 1.0 - self.params.omega;
        let mut worst = 0.0_f64;
        for c in 0..sp.grid().cells() {
            let (w, g) = (u[c], grad[c]);
            for j in 0..2 {
                let adv = w.0[0] * g.0[0][j] + w.0[1] * g.0[1][j];
                let dp = if j == 0 { px[c] } else { py[c] };
                let r = re * (dvdt[c].0[j] + adv) + dp - visc * lap[j][c] - div_sigma[c].0[j];
                worst = worst.max(r.abs());
            }
        }
        worst
    }
}
