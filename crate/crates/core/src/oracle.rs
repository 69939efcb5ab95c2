//! Independent reference computations used to check the solver modules:
//! an adaptive Dormand–Prince integrator, brute-force circle quadrature of
//! the orientation maps, the Taylor–Green vortex and IA series sums.
//!
//! None of these share code paths with the production implementations
//! beyond the tensor type.

use crate::tensor::{Outer, Tensor2, Vector};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("step size underflow at x = {x}")]
    StepUnderflow { x: f64 },
    #[error("too many steps before reaching x = {target}")]
    TooManySteps { target: f64 },
}

// Dormand–Prince 5(4) tableau
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Adaptive Dormand–Prince integration of `y' = f(x, y)`, returning the
/// state at every requested (increasing) output point.
pub fn dormand_prince<const N: usize>(
    mut f: impl FnMut(f64, &[f64; N]) -> [f64; N],
    x0: f64,
    y0: [f64; N],
    outputs: &[f64],
    rtol: f64,
    atol: f64,
) -> Result<Vec<[f64; N]>, OracleError> {
    let mut x = x0;
    let mut y = y0;
    let mut h = outputs.first().map_or(1e-3, |&t| ((t - x0).abs() * 1e-3).max(1e-8));
    let mut out = Vec::with_capacity(outputs.len());
    let mut steps = 0usize;
    for &target in outputs {
        while x < target {
            steps += 1;
            if steps > 10_000_000 {
                return Err(OracleError::TooManySteps { target });
            }
            let hs = h.min(target - x);
            let mut k = [[0.0; N]; 7];
            for s in 0..7 {
                let mut ys = y;
                for (r, a) in A[s].iter().enumerate().take(s) {
                    for i in 0..N {
                        ys[i] += hs * a * k[r][i];
                    }
                }
                k[s] = f(x + C[s] * hs, &ys);
            }
            let mut y5 = y;
            let mut err = 0.0_f64;
            for i in 0..N {
                let mut d5 = 0.0;
                let mut d4 = 0.0;
                for s in 0..7 {
                    d5 += B5[s] * k[s][i];
                    d4 += B4[s] * k[s][i];
                }
                y5[i] += hs * d5;
                let sc = atol + rtol * y[i].abs().max(y5[i].abs());
                err = err.max((hs * (d5 - d4)).abs() / sc);
            }
            if err <= 1.0 {
                x += hs;
                y = y5;
            }
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = hs * fac;
            if h < 1e-14 * x.abs().max(1.0) {
                return Err(OracleError::StepUnderflow { x });
            }
        }
        out.push(y);
    }
    Ok(out)
}

/// `y'' = ξ₀(y+ξ₂)^k (y')²` from `(0, 0, ξ₁)` by Dormand–Prince.
pub fn cauchy_reference(xi0: f64, xi1: f64, xi2: f64, k: f64, xs: &[f64]) -> Result<Vec<f64>, OracleError> {
    let sol = dormand_prince(
        |_, y: &[f64; 2]| [y[1], xi0 * (y[0] + xi2).powf(k) * y[1] * y[1]],
        0.0,
        [0.0, xi1],
        xs,
        1e-13,
        1e-15,
    )?;
    Ok(sol.into_iter().map(|y| y[0]).collect())
}

/// Brute-force uniform-angle quadrature of `S(G)` (full map) with `n` nodes.
pub fn orientation_reference(g: &Tensor2<2>, n: usize) -> Tensor2<2> {
    let w = 2.0 * PI / n as f64;
    let mut a = Tensor2::zero();
    let mut den = 0.0;
    for i in 0..n {
        let th = 2.0 * PI * i as f64 / n as f64;
        let gu = g.apply(&Vector::new(th.cos(), th.sin()));
        let r = gu.frobenius();
        a += gu.outer(&gu) * (w / r);
        den += w * r;
    }
    a * (1.0 / den) - Tensor2::identity() * 0.5
}

/// Brute-force uniform-angle quadrature of the normalized IA map.
pub fn orientation_ia_reference(g: &Tensor2<2>, n: usize) -> Tensor2<2> {
    let mut a = Tensor2::zero();
    for i in 0..n {
        let th = 2.0 * PI * i as f64 / n as f64;
        let gu = g.apply(&Vector::new(th.cos(), th.sin()));
        a += gu.outer(&gu) * (1.0 / gu.norm_sq());
    }
    a * (1.0 / n as f64) - Tensor2::identity() * 0.5
}

/// Taylor–Green vortex `A e^{-2νt} (sin x cos y, -cos x sin y)`.
pub fn taylor_green_velocity(x: f64, y: f64, t: f64, amp: f64, nu: f64) -> Vector<2> {
    let d = amp * (-2.0 * nu * t).exp();
    Vector::new(d * x.sin() * y.cos(), -d * x.cos() * y.sin())
}

/// Pressure of the vortex for `Re d_t v + Re v·∇v + ∇p = (1-ω)Δv`:
/// `p = Re A² e^{-4νt} (cos 2x + cos 2y)/4`.
pub fn taylor_green_pressure(x: f64, y: f64, t: f64, amp: f64, nu: f64, re: f64) -> f64 {
    re * amp * amp * (-4.0 * nu * t).exp() * ((2.0 * x).cos() + (2.0 * y).cos()) / 4.0
}

/// IA relaxation modulus `Σ_{p odd ≤ p_max} (8/π²p²) e^{-p²t}` summed directly.
pub fn ia_relaxation_modulus(t: f64, p_max: usize) -> f64 {
    let mut s = 0.0;
    let mut p = p_max as f64;
    while p >= 1.0 {
        s += (-p * p * t).exp() / (p * p);
        p -= 2.0;
    }
    8.0 / (PI * PI) * s
}

/// `∫₀^∞ m` for the truncated series, term by term: `Σ_{p odd ≤ p_max} 8/(π²p²)`.
pub fn ia_truncated_mass(p_max: usize) -> f64 {
    ia_relaxation_modulus(0.0, p_max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dormand_prince_exponential() {
        let xs: Vec<f64> = (1..=10).map(|i| i as f64 * 0.3).collect();
        let sol = dormand_prince(|_, y: &[f64; 1]| [-y[0]], 0.0, [1.0], &xs, 1e-12, 1e-14).unwrap();
        for (x, y) in xs.iter().zip(&sol) {
            assert!((y[0] - (-x).exp()).abs() < 1e-11);
        }
    }

    #[test]
    fn dormand_prince_harmonic_oscillator() {
        let xs = [PI / 2.0, PI, 2.0 * PI];
        let sol = dormand_prince(|_, y: &[f64; 2]| [y[1], -y[0]], 0.0, [0.0, 1.0], &xs, 1e-12, 1e-14).unwrap();
        assert!((sol[0][0] - 1.0).abs() < 1e-10);
        assert!(sol[1][0].abs() < 1e-10);
        assert!(sol[2][0].abs() < 1e-10 && (sol[2][1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn reference_orientation_of_identity_vanishes() {
        assert!(orientation_reference(&Tensor2::identity(), 1000).max_abs() < 1e-14);
        assert!(orientation_ia_reference(&Tensor2::identity(), 1000).max_abs() < 1e-14);
    }

    #[test]
    fn taylor_green_is_divergence_free() {
        let h = 1e-5;
        let (x, y) = (0.3, 1.1);
        let du = (taylor_green_velocity(x + h, y, 0.0, 1.0, 0.1).0[0] - taylor_green_velocity(x - h, y, 0.0, 1.0, 0.1).0[0]) / (2.0 * h);
        let dv = (taylor_green_velocity(x, y + h, 0.0, 1.0, 0.1).0[1] - taylor_green_velocity(x, y - h, 0.0, 1.0, 0.1).0[1]) / (2.0 * h);
        assert!((du + dv).abs() < 1e-9);
    }

    #[test]
    fn taylor_green_pressure_balances_advection() {
        // ∇p = -Re v·∇v for the vortex
        let (x, y, h, re) = (0.7, 2.1, 1e-5, 3.0);
        let v = |x, y| taylor_green_velocity(x, y, 0.0, 1.0, 0.0);
        let dvx = |x, y| (v(x + h, y) - v(x - h, y)) * (0.5 / h);
        let dvy = |x, y| (v(x, y + h) - v(x, y - h)) * (0.5 / h);
        let adv = dvx(x, y) * v(x, y).0[0] + dvy(x, y) * v(x, y).0[1];
        let px = (taylor_green_pressure(x + h, y, 0.0, 1.0, 0.0, re) - taylor_green_pressure(x - h, y, 0.0, 1.0, 0.0, re)) / (2.0 * h);
        let py = (taylor_green_pressure(x, y + h, 0.0, 1.0, 0.0, re) - taylor_green_pressure(x, y - h, 0.0, 1.0, 0.0, re)) / (2.0 * h);
        assert!((px + re * adv.0[0]).abs() < 1e-8);
        assert!((py + re * adv.0[1]).abs() < 1e-8);
    }

    #[test]
    fn relaxation_modulus_limits() {
        assert!((ia_truncated_mass(1999) - (1.0 - 2.03e-4)).abs() < 1e-5);
        let t = 7.0;
        assert!((ia_relaxation_modulus(t, 1999) - 8.0 / (PI * PI) * (-t).exp()).abs() < 1e-12);
    }
}
