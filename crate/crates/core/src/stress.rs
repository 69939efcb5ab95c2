//! Orientation field, extra stress and its divergence.
//!
//! ```text
//! S(x, s) = ∫₀^∞ m(T, x, s) F(G(T, x)) dT,    σ(x) = ω ∫_{-1/2}^{1/2} S ds
//! ```
//!
//! `F` is the truncated Doi–Edwards map in full mode. In IA mode the memory
//! is the explicit series, independent of `s`, and
//! `σ = ω ∫₀^∞ m(T) S_IA(G(T, x)) dT` with product-integration weights.

use crate::deformation::DeformationField;
use crate::grid::{AgeGrid, ArcGrid};
use crate::memory_kernel::KernelField;
use crate::orientation::{s_bound, OrientationMap};
use crate::spectral::Spectral;
use crate::tensor::{Tensor2, Vector};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StressError {
    #[error("age grids differ: kernel {kernel:?}, deformation {deformation:?}")]
    AgeMismatch { kernel: AgeGrid, deformation: AgeGrid },
    #[error("spatial grids differ")]
    GridMismatch,
    #[error("expected {expected} age weights, got {got}")]
    Weights { expected: usize, got: usize },
}

/// `F(G)` on every `(age slice, cell)`, in the deformation layout.
///
/// Evaluated once per step and shared by the stress and the drift.
pub fn evaluate_map(map: &OrientationMap, g: &DeformationField) -> Vec<Tensor2<2>> {
    g.values().par_iter().map(|t| map.eval(t)).collect()
}

/// `S(x, s) = Σ_j w_j m_j(x, s) F_j(x)` with trapezoid weights in age.
///
/// `mapped` is the output of [`evaluate_map`]; the result uses the
/// `[cell][node]` layout.
pub fn orientation_field(kf: &KernelField, mapped: &[Tensor2<2>], age: &AgeGrid) -> Result<Vec<Tensor2<2>>, StressError> {
    if kf.age() != age {
        return Err(StressError::AgeMismatch { kernel: *kf.age(), deformation: *age });
    }
    let (cells, nodes) = (kf.grid().cells(), kf.arc().nodes());
    if mapped.len() != cells * age.slices() {
        return Err(StressError::GridMismatch);
    }
    let w = age.weights();
    let inv = 1.0 / age.dt_age;
    let k = kf.values();
    let sl = kf.slice_len();
    let mut out = vec![Tensor2::zero(); cells * nodes];
    out.par_chunks_mut(nodes).enumerate().for_each(|(c, line)| {
        for j in 1..age.slices() {
            let f = mapped[j * cells + c];
            let base = j * sl + c * nodes;
            for (kk, s) in line.iter_mut().enumerate() {
                let m = (k[base + kk - sl] - k[base + kk]) * inv;
                *s += f * (w[j] * m);
            }
        }
    });
    Ok(out)
}

/// `σ = ω ∫ S ds` by the trapezoid rule on the arc grid.
pub fn stress_tensor(s_field: &[Tensor2<2>], arc: &ArcGrid, omega: f64) -> Vec<Tensor2<2>> {
    let w = arc.weights();
    s_field
        .par_chunks(arc.nodes())
        .map(|line| line.iter().zip(&w).fold(Tensor2::zero(), |acc, (s, &wk)| acc + *s * (wk * omega)))
        .collect()
}

/// Full-mode stress straight from `K` and `G`.
pub fn full_stress(
    kf: &KernelField,
    mapped: &[Tensor2<2>],
    age: &AgeGrid,
    omega: f64,
) -> Result<(Vec<Tensor2<2>>, Vec<Tensor2<2>>), StressError> {
    let s = orientation_field(kf, mapped, age)?;
    let sigma = stress_tensor(&s, kf.arc(), omega);
    Ok((s, sigma))
}

/// `σ = ω Σ_j W_j S_IA(G_j)` with the product weights of the IA memory.
pub fn ia_stress(mapped: &[Tensor2<2>], cells: usize, weights: &[f64], omega: f64) -> Result<Vec<Tensor2<2>>, StressError> {
    if mapped.len() != cells * weights.len() {
        return Err(StressError::Weights { expected: mapped.len() / cells.max(1), got: weights.len() });
    }
    Ok((0..cells)
        .into_par_iter()
        .map(|c| {
            weights
                .iter()
                .enumerate()
                .fold(Tensor2::zero(), |acc, (j, &w)| acc + mapped[j * cells + c] * (w * omega))
        })
        .collect())
}

/// `(div σ)_j = ∂_i σ_ij` by spectral differentiation.
pub fn stress_divergence(sp: &Spectral, sigma: &[Tensor2<2>]) -> Vec<Vector<2>> {
    let comp = |i: usize, j: usize| -> Vec<f64> { sigma.iter().map(|t| t.0[i][j]).collect() };
    let mut out = vec![Vector::zero(); sigma.len()];
    for j in 0..2 {
        let a = sp.derivative_real(&comp(0, j), 0);
        let b = sp.derivative_real(&comp(1, j), 1);
        for (o, (x, y)) in out.iter_mut().zip(a.iter().zip(&b)) {
            o.0[j] = x + y;
        }
    }
    out
}

/// Pointwise summaries of a stress field.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StressDiagnostics {
    /// `max_x |σ(x)|`.
    pub max_norm: f64,
    pub max_trace: f64,
    pub max_asymmetry: f64,
}

pub fn stress_diagnostics(sigma: &[Tensor2<2>]) -> StressDiagnostics {
    sigma.iter().fold(StressDiagnostics::default(), |d, t| StressDiagnostics {
        max_norm: d.max_norm.max(t.frobenius()),
        max_trace: d.max_trace.max(t.trace().abs()),
        max_asymmetry: d.max_asymmetry.max(t.asymmetry()),
    })
}

/// `ω (1 + 1/√2)`.
pub fn stress_bound(omega: f64) -> f64 {
    omega * s_bound(2)
}

/// Bound on the stress neglected beyond `T_max`, given the current envelope
/// `C = max m e^{2Weμ T}`: `ω S∞ C e^{-2Weμ T_max} / (2Weμ)`.
pub fn tail_budget(omega: f64, envelope: f64, mu: f64, we: f64, t_max: f64) -> f64 {
    let rate = 2.0 * we * mu;
    omega * s_bound(2) * envelope * (-rate * t_max).exp() / rate
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PeriodicGrid;
    use crate::memory_kernel::IaMemory;
    use crate::oracle::{ia_relaxation_modulus, orientation_reference};
    use crate::orientation::{Closure, TruncationProfile};
    use std::f64::consts::PI;

    fn map(closure: Closure) -> OrientationMap {
        OrientationMap::new(64, TruncationProfile::from_det_floor(1.0).unwrap(), closure)
    }

    fn setup(n: usize, n_t: usize) -> (PeriodicGrid, ArcGrid, AgeGrid) {
        (PeriodicGrid::new(n, 2.0 * PI), ArcGrid::new(16), AgeGrid::new(n_t, 0.05))
    }

    #[test]
    fn identity_deformation_gives_no_stress() {
        let (grid, arc, age) = setup(4, 20);
        let kf = KernelField::quiescent(grid, arc, age);
        let g = DeformationField::identity(grid, age);
        let mapped = evaluate_map(&map(Closure::Full), &g);
        let (s, sigma) = full_stress(&kf, &mapped, &age, 0.5).unwrap();
        assert!(s.iter().all(|t| t.max_abs() < 1e-15));
        assert!(sigma.iter().all(|t| t.max_abs() < 1e-15));
    }

    #[test]
    fn zero_memory_gives_no_stress() {
        let (grid, arc, age) = setup(4, 20);
        let kf = KernelField::zero_memory(grid, arc, age);
        let g = DeformationField::from_fn(grid, age, |_, x, _| Tensor2::new(1.5, 0.3 * x.sin(), 0.0, 1.0 / 1.5));
        let mapped = evaluate_map(&map(Closure::Full), &g);
        let (_, sigma) = full_stress(&kf, &mapped, &age, 0.5).unwrap();
        assert!(sigma.iter().all(|t| t.max_abs() == 0.0));
    }

    #[test]
    fn single_slice_memory_collapses_to_map_value() {
        let (grid, arc, age) = setup(4, 10);
        let j0 = 4;
        // K drops by one unit between slices j0-1 and j0 only
        let cells = grid.cells();
        let nodes = arc.nodes();
        let mut vals = vec![0.0; age.slices() * cells * nodes];
        for j in 0..age.slices() {
            let level = if j < j0 { 2.0 } else { 1.0 };
            for c in 0..cells {
                for k in 1..nodes - 1 {
                    vals[(j * cells + c) * nodes + k] = level;
                }
            }
        }
        let kf = KernelField::from_values(grid, arc, age, vals).unwrap();
        let g0 = Tensor2::diag([2.0, 0.5]);
        let g = DeformationField::from_fn(grid, age, |t, _, _| {
            if (t - age.age(j0)).abs() < 1e-12 {
                g0
            } else {
                Tensor2::identity()
            }
        });
        let mapped = evaluate_map(&map(Closure::Full), &g);
        let s = orientation_field(&kf, &mapped, &age).unwrap();
        let reference = orientation_reference(&g0, 1_000_000);
        // weight ΔT times m = 1/ΔT
        let k = arc.centre();
        assert!((s[k] - reference).max_abs() < 1e-8);
        assert!(s[0].max_abs() == 0.0);
    }

    #[test]
    fn constant_orientation_integrates_over_unit_arc() {
        let arc = ArcGrid::new(8);
        let s0 = Tensor2::new(0.2, -0.1, -0.1, -0.2);
        let sigma = stress_tensor(&vec![s0; 3 * arc.nodes()], &arc, 0.7);
        for t in &sigma {
            assert!((*t - s0 * 0.7).max_abs() < 1e-15);
        }
    }

    #[test]
    fn divergence_of_single_mode() {
        let grid = PeriodicGrid::new(16, 2.0 * PI);
        let sp = Spectral::new(grid);
        let sigma = grid.map(|x, y| {
            let a = (2.0 * x + y).cos();
            Tensor2::new(0.3 * a, 0.5 * a, 0.5 * a, -0.3 * a)
        });
        let div = stress_divergence(&sp, &sigma);
        for c in 0..grid.cells() {
            let (x, y) = grid.coords(c);
            let d = -(2.0 * x + y).sin();
            // ∂_x σ_xj + ∂_y σ_yj with ∂_x → 2, ∂_y → 1
            let ex = d * (2.0 * 0.3 + 0.5);
            let ey = d * (2.0 * 0.5 - 0.3);
            assert!((div[c].0[0] - ex).abs() < 1e-12);
            assert!((div[c].0[1] - ey).abs() < 1e-12);
        }
        let flat = stress_divergence(&sp, &vec![Tensor2::new(1.0, 2.0, 2.0, -1.0); grid.cells()]);
        assert!(flat.iter().all(|v| v.0[0].abs() < 1e-13 && v.0[1].abs() < 1e-13));
    }

    #[test]
    fn divergence_matches_fourth_order_differences() {
        let n = 64;
        let grid = PeriodicGrid::new(n, 2.0 * PI);
        let sp = Spectral::new(grid);
        let f = |x: f64, y: f64| {
            let a = (x.sin() + 0.5 * (2.0 * y).cos()).exp() * 0.2;
            let b = (y.sin() * x.cos()) * 0.4;
            Tensor2::new(a, b, b, -a)
        };
        let sigma = grid.map(f);
        let div = stress_divergence(&sp, &sigma);
        // fine-step finite differences of the analytic field as the oracle
        let h = 1e-3;
        let d = |x: f64, y: f64, i: usize, j: usize| {
            let at = |dx: f64, dy: f64| f(x + dx, y + dy).0[i][j];
            let (ex, ey) = if i == 0 { (h, 0.0) } else { (0.0, h) };
            (-at(2.0 * ex, 2.0 * ey) + 8.0 * at(ex, ey) - 8.0 * at(-ex, -ey) + at(-2.0 * ex, -2.0 * ey)) / (12.0 * h)
        };
        let mut err = 0.0_f64;
        let mut scale = 0.0_f64;
        for c in 0..grid.cells() {
            let (x, y) = grid.coords(c);
            for j in 0..2 {
                let e = d(x, y, 0, j) + d(x, y, 1, j);
                err = err.max((div[c].0[j] - e).abs());
                scale = scale.max(e.abs());
            }
        }
        assert!(err / scale < 1e-6, "{}", err / scale);
    }

    #[test]
    fn ia_step_shear_relaxes_like_the_modulus() {
        // G(T) = δ + γ₀ E for ages older than the shear time t
        let (grid, _, _) = setup(4, 1);
        let age = AgeGrid::new(400, 0.02);
        let ia = IaMemory::new(1999);
        let w = ia.hat_weights(&age);
        let gamma0 = 1e-3;
        let m = map(Closure::Ia);
        for t in [0.5, 1.0, 2.0] {
            let g = DeformationField::from_fn(grid, age, |tt, _, _| {
                if tt > t + 1e-12 {
                    Tensor2::new(1.0, gamma0, 0.0, 1.0)
                } else {
                    Tensor2::identity()
                }
            });
            let mapped = evaluate_map(&m, &g);
            let sigma = ia_stress(&mapped, grid.cells(), &w, 1.0).unwrap();
            // linear response σ_12 = (1/4)γ₀ ∫_t^∞ m; that tail is the modulus
            let expect = 0.25 * gamma0 * (ia_relaxation_modulus(t, 1999) - ia.survival(age.t_max()));
            let got = sigma[0].0[0][1];
            // half a hat at the jump
            let jump = 0.5 * w[(t / age.dt_age).round() as usize] * 0.25 * gamma0;
            assert!((got - expect).abs() < jump + 1e-3 * expect, "{t}: {got} vs {expect}");
        }
    }

    #[test]
    fn ia_and_full_differ_by_their_linear_coefficients() {
        let (grid, arc, age) = setup(4, 100);
        let eps = 1e-4;
        let g = DeformationField::from_fn(grid, age, |_, _, _| Tensor2::new(1.0, eps, 0.0, 1.0));
        let ia = IaMemory::new(1999);
        let kf = KernelField::ia_equilibrium(grid, arc, age, &ia);
        let w_ia = ia.hat_weights(&age);
        let (_, full) = full_stress(&kf, &evaluate_map(&map(Closure::Full), &g), &age, 1.0).unwrap();
        let ias = ia_stress(&evaluate_map(&map(Closure::Ia), &g), grid.cells(), &w_ia, 1.0).unwrap();
        // total memory mass each quadrature sees
        let (wa, ws) = (age.weights(), arc.weights());
        let mass_full: f64 = (1..age.slices())
            .map(|j| wa[j] * (0..arc.nodes()).map(|k| ws[k] * kf.memory_at(j, 0, k)).sum::<f64>())
            .sum();
        let mass_ia: f64 = w_ia.iter().sum();
        let expect = 1.5 * mass_full / mass_ia;
        let r = full[0].0[0][1] / ias[0].0[0][1];
        assert!((r - expect).abs() < 1e-3 * expect, "{r} vs {expect}");
    }

    #[test]
    fn diagnostics_and_bounds() {
        let d = stress_diagnostics(&[Tensor2::new(0.1, 0.2, 0.2, -0.1), Tensor2::new(0.3, 0.0, 0.0, -0.3)]);
        assert!((d.max_norm - 0.18_f64.sqrt()).abs() < 1e-15);
        assert_eq!(d.max_trace, 0.0);
        assert!((stress_bound(1.0) - (1.0 + 0.5_f64.sqrt())).abs() < 1e-15);
        assert!(tail_budget(0.5, 1.0, 0.5, 1.0, 20.0) < 1e-8);
    }

    #[test]
    fn age_mismatch_is_rejected() {
        let (grid, arc, age) = setup(4, 10);
        let kf = KernelField::quiescent(grid, arc, age);
        let other = AgeGrid::new(10, 0.1);
        let g = DeformationField::identity(grid, other);
        let mapped = evaluate_map(&map(Closure::Full), &g);
        assert!(matches!(orientation_field(&kf, &mapped, &other), Err(StressError::AgeMismatch { .. })));
    }
}
