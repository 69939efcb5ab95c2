//! One-dimensional quadrature: adaptive Gauss–Kronrod (7/15) on finite and
//! semi-infinite intervals, and Gauss–Legendre node generation.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("integrand not finite at x = {x}")]
    NonFinite { x: f64 },
    #[error("adaptive quadrature did not converge: estimate {estimate}, error {error}")]
    NoConvergence { estimate: f64, error: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64), QuadError> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    if !fc.is_finite() {
        return Err(QuadError::NonFinite { x: c });
    }
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let (xl, xr) = (c - h * x, c + h * x);
        let (fl, fr) = (f(xl), f(xr));
        if !fl.is_finite() {
            return Err(QuadError::NonFinite { x: xl });
        }
        if !fr.is_finite() {
            return Err(QuadError::NonFinite { x: xr });
        }
        kronrod += w * (fl + fr);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (fl + fr);
        }
    }
    Ok((kronrod * h, ((kronrod - gauss) * h).abs()))
}

/// Globally adaptive bisection on `[a, b]` until the summed error estimate is
/// below `max(abs_tol, rel_tol * |I|)`.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<QuadResult, QuadError> {
    if a == b {
        return Ok(QuadResult { value: 0.0, error: 0.0, evaluations: 0 });
    }
    let max_intervals = 20_000;
    let (v, e) = gk15(&mut f, a, b)?;
    let mut intervals = vec![(a, b, v, e)];
    let mut evaluations = 15;
    loop {
        let total: f64 = intervals.iter().map(|iv| iv.2).sum();
        let err: f64 = intervals.iter().map(|iv| iv.3).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(QuadResult { value: total, error: err, evaluations });
        }
        if intervals.len() >= max_intervals {
            return Err(QuadError::NoConvergence { estimate: total, error: err });
        }
        let (idx, _) = intervals
            .iter()
            .enumerate()
            .fold((0, -1.0), |best, (i, iv)| if iv.3 > best.1 { (i, iv.3) } else { best });
        let (lo, hi, _, _) = intervals.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            let total: f64 = intervals.iter().map(|iv| iv.2).sum();
            return Err(QuadError::NoConvergence { estimate: total, error: err });
        }
        let (v1, e1) = gk15(&mut f, lo, mid)?;
        let (v2, e2) = gk15(&mut f, mid, hi)?;
        evaluations += 30;
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
}

/// `∫_a^∞ f` through the map `x = a + t / (1 - t)`, `t ∈ [0, 1)`.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<QuadResult, QuadError> {
    integrate(
        |t| {
            if t >= 1.0 {
                return 0.0;
            }
            let one_m = 1.0 - t;
            let x = a + t / one_m;
            let v = f(x) / (one_m * one_m);
            if v.is_finite() {
                v
            } else if x > 1e300 {
                0.0
            } else {
                v
            }
        },
        0.0,
        1.0,
        abs_tol,
        rel_tol,
    )
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` (Newton on `P_n`).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pnm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let r = integrate(|x| 3.0 * x * x + 1.0, 0.0, 2.0, 1e-14, 1e-14).unwrap();
        assert!((r.value - 10.0).abs() < 1e-13);
    }

    #[test]
    fn gaussian_integral() {
        let r = integrate_to_infinity(|x| (-x * x).exp(), 0.0, 1e-14, 1e-14).unwrap();
        assert!((r.value - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-13);
    }

    #[test]
    fn inverse_sqrt_singularity_via_substitution() {
        // ∫_0^1 x^{-1/2} dx = 2 with x = u²
        let r = integrate(|u: f64| 2.0 * u / u, 0.0, 1.0, 1e-14, 1e-14).unwrap();
        assert!((r.value - 2.0).abs() < 1e-13);
    }

    #[test]
    fn nonfinite_reported() {
        let r = integrate(|x: f64| 1.0 / x, 0.0, 1.0, 1e-10, 0.0);
        assert!(matches!(r, Err(QuadError::NonFinite { .. }) | Err(QuadError::NoConvergence { .. })));
    }

    #[test]
    fn legendre_rules_integrate_polynomials() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
            for deg in 0..(2 * n) {
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                assert!((q - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }
}
