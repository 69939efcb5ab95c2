//! Closed-form solution of the Cauchy problem
//!
//! ```text
//! y'' = ξ₀ (y + ξ₂)^k (y')²,   y(0) = 0,   y'(0) = ξ₁
//! ```
//!
//! through `F(X) = ∫₀^X e^{-ξ₀(x+ξ₂)^{k+1}/(k+1)} dx`, which maps `[0, ∞)`
//! increasingly onto `[0, ℓ)`. Along a solution
//! `d/dx F(y(x)) = ξ₁ e^{-ξ₀ξ₂^{k+1}/(k+1)}`, hence
//! `y(x) = F⁻¹(ξ₁ e^{-ξ₀ξ₂^{k+1}/(k+1)} x)` for `x < (ℓ/ξ₁) e^{ξ₀ξ₂^{k+1}/(k+1)}`.
//!
//! Also the two-boundary characteristic foot used by the transport tests.

use crate::quad::{integrate, integrate_to_infinity};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("invalid Cauchy parameters: {0}")]
    InvalidParams(String),
    #[error("F^-1 undefined at y = {y}: the range of F is [0, {ell})")]
    Domain { y: f64, ell: f64 },
    #[error("x = {x} is beyond the blowup point {boundary}")]
    BlowUp { x: f64, boundary: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CauchyParams {
    pub xi0: f64,
    pub xi1: f64,
    pub xi2: f64,
    pub k: f64,
}

/// The Cauchy problem with `ℓ = lim F` precomputed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cauchy {
    p: CauchyParams,
    c: f64,
    ell: f64,
}

const F_ABS_TOL: f64 = 1e-13;

impl Cauchy {
    pub fn new(p: CauchyParams) -> Result<Self, OdeError> {
        let finite = [p.xi0, p.xi1, p.xi2, p.k].iter().all(|v| v.is_finite());
        if !finite || p.xi0 < 0.0 || p.xi1 <= 0.0 || p.xi2 <= 0.0 || p.k <= 0.0 {
            return Err(OdeError::InvalidParams(format!("{p:?}")));
        }
        let c = p.xi0 / (p.k + 1.0);
        let mut me = Self { p, c, ell: f64::INFINITY };
        if p.xi0 > 0.0 {
            me.ell = integrate_to_infinity(|x| me.f_prime(x), 0.0, F_ABS_TOL, 1e-15)
                .map_err(|e| OdeError::InvalidParams(e.to_string()))?
                .value;
        }
        Ok(me)
    }

    pub fn params(&self) -> &CauchyParams {
        &self.p
    }

    /// `ℓ = ∫₀^∞ F′` (infinite when `ξ₀ = 0`).
    pub fn ell(&self) -> f64 {
        self.ell
    }

    /// `F′(X) = e^{-ξ₀(X+ξ₂)^{k+1}/(k+1)}`.
    pub fn f_prime(&self, x: f64) -> f64 {
        (-self.c * (x + self.p.xi2).powf(self.p.k + 1.0)).exp()
    }

    pub fn f(&self, x: f64) -> f64 {
        if self.p.xi0 == 0.0 {
            return x;
        }
        integrate(|u| self.f_prime(u), 0.0, x, F_ABS_TOL, 1e-15)
            .expect("smooth bounded integrand")
            .value
    }

    pub fn f_inverse(&self, y: f64) -> Result<f64, OdeError> {
        if !(y >= 0.0 && y < self.ell) {
            return Err(OdeError::Domain { y, ell: self.ell });
        }
        if self.p.xi0 == 0.0 {
            return Ok(y);
        }
        let mut hi = y.max(1e-3);
        while self.f(hi) < y {
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(OdeError::Domain { y, ell: self.ell });
            }
        }
        let mut lo = 0.0;
        while hi - lo > 1e-10 * hi.max(1e-300) {
            let mid = 0.5 * (lo + hi);
            if self.f(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut x = 0.5 * (lo + hi);
        for _ in 0..2 {
            let step = (self.f(x) - y) / self.f_prime(x);
            let next = x - step;
            if next.is_finite() && next >= 0.0 {
                x = next;
            }
        }
        Ok(x)
    }

    /// The blowup point `(ℓ/ξ₁) e^{ξ₀ξ₂^{k+1}/(k+1)}`.
    pub fn blowup_point(&self) -> f64 {
        self.ell / self.p.xi1 * (self.c * self.p.xi2.powf(self.p.k + 1.0)).exp()
    }

    fn slope(&self) -> f64 {
        self.p.xi1 * (-self.c * self.p.xi2.powf(self.p.k + 1.0)).exp()
    }

    /// `y(x)` on `[0, blowup)`.
    pub fn solution(&self, x: f64) -> Result<f64, OdeError> {
        let boundary = self.blowup_point();
        if !(x >= 0.0 && x < boundary) {
            return Err(OdeError::BlowUp { x, boundary });
        }
        self.f_inverse(self.slope() * x).map_err(|_| OdeError::BlowUp { x, boundary })
    }

    /// `y′(x) = ξ₁ e^{c((y+ξ₂)^{k+1} - ξ₂^{k+1})}` from the first integral.
    pub fn derivative(&self, x: f64) -> Result<f64, OdeError> {
        let y = self.solution(x)?;
        Ok(self.slope() / self.f_prime(y))
    }
}

/// Value at `(t, T)` of a quantity transported along `dT/dt = 1/We`:
/// the initial trace at age `T - t/We` when `t ≤ We T`, otherwise the
/// inflow trace at time `t - We T`.
pub fn characteristic_value<X>(
    t: f64,
    age: f64,
    we: f64,
    inflow: impl FnOnce(f64) -> X,
    initial: impl FnOnce(f64) -> X,
) -> X {
    if t <= we * age {
        initial(age - t / we)
    } else {
        inflow(t - we * age)
    }
}
