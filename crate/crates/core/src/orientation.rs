//! The orientation map `S(G)` of a deformed, isotropically distributed set
//! of tube segments, its derivative, the truncated map used near `G = 0`,
//! and the independent-alignment variant.
//!
//! Averages are unnormalized surface integrals over the unit sphere
//! `S^{d-1}`, `⟨f⟩₀ = ∫ f(u) du`, so `⟨1⟩₀ = 2π^{d/2}/Γ(d/2)`.
//!
//! ```text
//! S(G)      = ⟨(Gu ⊗ Gu)/|Gu|⟩₀ / ⟨|Gu|⟩₀ − δ/d
//! S_IA(G)   = ⟨(Gu ⊗ Gu)/|Gu|²⟩₀ / ⟨1⟩₀ − δ/d
//! F̃(G)      = S(G) χ(|G|)
//! ```

use crate::quad::gauss_legendre;
use crate::tensor::{Tensor2, Tensor4, TensorValue, Vector};
use std::f64::consts::PI;
use thiserror::Error;

/// Inputs with `|G|` below this are rejected by the untruncated maps.
pub const DEGENERATE_NORM: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrientationError {
    #[error("orientation map undefined for |G| = {norm:e}")]
    Degenerate { norm: f64 },
    #[error("integrand not finite at quadrature node {node}")]
    NonFinite { node: usize },
    #[error("truncation profile violates its slope bound: max |chi'| = {max_slope} > {bound}")]
    SlopeBound { max_slope: f64, bound: f64 },
    #[error("invalid truncation threshold {0}")]
    InvalidThreshold(f64),
}

/// `sup |S(G)|` from the triangle inequality: `1 + 1/√d`.
pub fn s_bound(dim: usize) -> f64 {
    1.0 + 1.0 / (dim as f64).sqrt()
}

/// Surface measure of `S^{d-1}`.
pub fn sphere_measure(dim: usize) -> f64 {
    match dim {
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => unreachable!("only d = 2, 3"),
    }
}

/// Positive-weight rule on the unit sphere.
#[derive(Debug, Clone)]
pub struct SphereQuadrature<const D: usize> {
    nodes: Vec<Vector<D>>,
    weights: Vec<f64>,
    // One representative per antipodal pair with doubled weight; even
    // integrands (all orientation maps) only need these.
    even_nodes: Vec<Vector<D>>,
    even_weights: Vec<f64>,
}

impl<const D: usize> SphereQuadrature<D> {
    pub fn from_nodes(nodes: Vec<Vector<D>>, weights: Vec<f64>) -> Self {
        assert_eq!(nodes.len(), weights.len());
        let mut paired = vec![false; nodes.len()];
        let mut even_nodes = Vec::new();
        let mut even_weights = Vec::new();
        let mut symmetric = true;
        for i in 0..nodes.len() {
            if paired[i] {
                continue;
            }
            let anti = -nodes[i];
            let partner = (i + 1..nodes.len()).find(|&j| {
                !paired[j] && (nodes[j] - anti).max_abs() < 1e-12 && (weights[j] - weights[i]).abs() < 1e-14
            });
            match partner {
                Some(j) => {
                    paired[i] = true;
                    paired[j] = true;
                    even_nodes.push(nodes[i]);
                    even_weights.push(2.0 * weights[i]);
                }
                None => {
                    symmetric = false;
                    break;
                }
            }
        }
        if !symmetric {
            even_nodes = nodes.clone();
            even_weights = weights.clone();
        }
        Self { nodes, weights, even_nodes, even_weights }
    }

    pub fn nodes(&self) -> &[Vector<D>] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `⟨1⟩₀` as integrated by the rule.
    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    fn even(&self) -> impl Iterator<Item = (&Vector<D>, f64)> {
        self.even_nodes.iter().zip(self.even_weights.iter().copied())
    }
}

impl SphereQuadrature<2> {
    /// Trapezoid rule with `n` equally spaced angles, weights `2π/n`.
    pub fn circle(n: usize) -> Self {
        assert!(n >= 4, "circle rule needs at least 4 nodes");
        let w = 2.0 * PI / n as f64;
        let nodes = (0..n)
            .map(|i| {
                let th = 2.0 * PI * i as f64 / n as f64;
                Vector::new(th.cos(), th.sin())
            })
            .collect();
        Self::from_nodes(nodes, vec![w; n])
    }
}

impl SphereQuadrature<3> {
    /// Gauss–Legendre in `cos θ` times a `2n`-point trapezoid in `φ`; exact
    /// for polynomials in `u` of degree `2n - 1`.
    pub fn sphere(n: usize) -> Self {
        let (x, wx) = gauss_legendre(n);
        let nphi = 2 * n;
        let mut nodes = Vec::with_capacity(n * nphi);
        let mut weights = Vec::with_capacity(n * nphi);
        for (ct, w) in x.iter().zip(&wx) {
            let st = (1.0 - ct * ct).sqrt();
            for k in 0..nphi {
                let phi = 2.0 * PI * (k as f64 + 0.5) / nphi as f64;
                nodes.push(Vector([st * phi.cos(), st * phi.sin(), *ct]));
                weights.push(w * 2.0 * PI / nphi as f64);
            }
        }
        Self::from_nodes(nodes, weights)
    }
}

/// `⟨f⟩₀ = Σ_i w_i f(u_i)`.
pub fn sphere_average<const D: usize, T, F>(
    mut f: F,
    quad: &SphereQuadrature<D>,
) -> Result<T, OrientationError>
where
    T: TensorValue,
    F: FnMut(&Vector<D>) -> T,
{
    let mut acc = T::zero();
    for (node, (u, w)) in quad.nodes.iter().zip(&quad.weights).enumerate() {
        let v = f(u);
        if !v.is_finite() {
            return Err(OrientationError::NonFinite { node });
        }
        acc.axpy(*w, &v);
    }
    Ok(acc)
}

fn normalized<const D: usize>(g: &Tensor2<D>) -> Result<(Tensor2<D>, f64), OrientationError> {
    let norm = g.frobenius();
    if !norm.is_finite() || norm < DEGENERATE_NORM {
        return Err(OrientationError::Degenerate { norm });
    }
    Ok((*g * (1.0 / norm), norm))
}

/// `⟨(Gu ⊗ Gu) / |Gu|⟩₀` (symmetric) and `⟨|Gu|⟩₀` over the even node set.
fn first_moments<const D: usize>(g: &Tensor2<D>, quad: &SphereQuadrature<D>) -> (Tensor2<D>, f64) {
    let mut a = Tensor2::<D>::zero();
    let mut den = 0.0;
    for (u, w) in quad.even() {
        let gu = g.apply(u);
        let r = gu.frobenius();
        if r == 0.0 {
            continue;
        }
        den += w * r;
        let inv = w / r;
        for i in 0..D {
            for j in i..D {
                a.0[i][j] += inv * gu.0[i] * gu.0[j];
            }
        }
    }
    for i in 0..D {
        for j in 0..i {
            a.0[i][j] = a.0[j][i];
        }
    }
    (a, den)
}

/// Doi–Edwards orientation map.
pub fn s_of_g<const D: usize>(
    g: &Tensor2<D>,
    quad: &SphereQuadrature<D>,
) -> Result<Tensor2<D>, OrientationError> {
    let (gn, _) = normalized(g)?;
    let (a, den) = first_moments(&gn, quad);
    let mut s = a * (1.0 / den);
    for i in 0..D {
        s.0[i][i] -= 1.0 / D as f64;
    }
    Ok(s)
}

/// Derivative `S′(G)_{ijkl} = ∂S_kl/∂G_ij`.
pub fn s_prime<const D: usize>(
    g: &Tensor2<D>,
    quad: &SphereQuadrature<D>,
) -> Result<Tensor4<D>, OrientationError> {
    let (gn, norm) = normalized(g)?;
    // B_ij = ⟨(Gu)_i u_j / r⟩, A_kl = ⟨(Gu)_k (Gu)_l / r⟩,
    // F_ijkl = ⟨(Gu)_k (Gu)_l (Gu)_i u_j / r³⟩
    let mut a = Tensor2::<D>::zero();
    let mut b = Tensor2::<D>::zero();
    let mut f = Tensor4::<D>::zero();
    let mut den = 0.0;
    for (u, w) in quad.even() {
        let gu = gn.apply(u);
        let r = gu.frobenius();
        if r == 0.0 {
            continue;
        }
        den += w * r;
        let inv = w / r;
        let inv3 = inv / (r * r);
        for i in 0..D {
            for j in 0..D {
                a.0[i][j] += inv * gu.0[i] * gu.0[j];
                b.0[i][j] += inv * gu.0[i] * u.0[j];
                let c = inv3 * gu.0[i] * u.0[j];
                for k in 0..D {
                    for l in 0..D {
                        f.0[i][j][k][l] += c * gu.0[k] * gu.0[l];
                    }
                }
            }
        }
    }
    let mut out = Tensor4::<D>::zero();
    let inv_den = 1.0 / den;
    for i in 0..D {
        for j in 0..D {
            for k in 0..D {
                for l in 0..D {
                    let mut v = -b.0[i][j] * a.0[k][l] * inv_den * inv_den - f.0[i][j][k][l] * inv_den;
                    // ⟨δ_ik u_j (Gu)_l + δ_il u_j (Gu)_k⟩/r = δ_ik B_lj + δ_il B_kj
                    if i == k {
                        v += b.0[l][j] * inv_den;
                    }
                    if i == l {
                        v += b.0[k][j] * inv_den;
                    }
                    out.0[i][j][k][l] = v;
                }
            }
        }
    }
    Ok(out * (1.0 / norm))
}

/// Independent-alignment orientation map, normalized so `S_IA(δ) = 0`.
pub fn s_ia<const D: usize>(
    g: &Tensor2<D>,
    quad: &SphereQuadrature<D>,
) -> Result<Tensor2<D>, OrientationError> {
    let (gn, _) = normalized(g)?;
    let mut a = Tensor2::<D>::zero();
    let mut measure = 0.0;
    for (u, w) in quad.even() {
        measure += w;
        let gu = gn.apply(u);
        let r2 = gu.norm_sq();
        if r2 == 0.0 {
            continue;
        }
        let inv = w / r2;
        for i in 0..D {
            for j in i..D {
                a.0[i][j] += inv * gu.0[i] * gu.0[j];
            }
        }
    }
    for i in 0..D {
        for j in 0..i {
            a.0[i][j] = a.0[j][i];
        }
    }
    let mut s = a * (1.0 / measure);
    for i in 0..D {
        s.0[i][i] -= 1.0 / D as f64;
    }
    Ok(s)
}

/// Smooth cutoff `χ` with `χ = 0` on `[0, γ̃/2]`, `χ = 1` on `[γ̃, ∞)`.
///
/// On the transition the profile is the degree-7 polynomial whose derivative
/// is `t²(1-t)²(70 - (560/3) t(1-t))` in `t = (r - γ̃/2)/(γ̃/2)`: it is `C²`
/// and its steepest slope is `35/12 / γ̃ < 3/γ̃`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationProfile {
    gamma_tilde: f64,
}

impl TruncationProfile {
    pub fn new(gamma_tilde: f64) -> Result<Self, OrientationError> {
        if !(gamma_tilde.is_finite() && gamma_tilde > 0.0) {
            return Err(OrientationError::InvalidThreshold(gamma_tilde));
        }
        let prof = Self { gamma_tilde };
        let bound = 3.0 / gamma_tilde;
        let n = 4096;
        let mut max_slope = 0.0_f64;
        for i in 0..=n {
            let r = gamma_tilde * (0.5 + 0.5 * i as f64 / n as f64);
            max_slope = max_slope.max(prof.chi_prime(r).abs());
        }
        if max_slope > bound {
            return Err(OrientationError::SlopeBound { max_slope, bound });
        }
        Ok(prof)
    }

    /// Threshold from the determinant floor `γ` of the initial deformation:
    /// `γ̃ = √(2 min(γ, 1))`.
    pub fn from_det_floor(gamma: f64) -> Result<Self, OrientationError> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(OrientationError::InvalidThreshold(gamma));
        }
        Self::new((2.0 * gamma.min(1.0)).sqrt())
    }

    pub fn gamma_tilde(&self) -> f64 {
        self.gamma_tilde
    }

    fn t(&self, r: f64) -> Option<f64> {
        let lo = 0.5 * self.gamma_tilde;
        if r <= lo {
            None
        } else if r >= self.gamma_tilde {
            Some(1.0)
        } else {
            Some((r - lo) / lo)
        }
    }

    pub fn chi(&self, r: f64) -> f64 {
        match self.t(r) {
            None => 0.0,
            Some(t) if t >= 1.0 => 1.0,
            Some(t) => {
                let t3 = t * t * t;
                t3 * (70.0 / 3.0 + t * (-245.0 / 3.0 + t * (126.0 + t * (-280.0 / 3.0 + t * 80.0 / 3.0))))
            }
        }
    }

    pub fn chi_prime(&self, r: f64) -> f64 {
        match self.t(r) {
            None => 0.0,
            Some(t) if t >= 1.0 => 0.0,
            Some(t) => {
                let u = t * (1.0 - t);
                u * u * (70.0 - 560.0 / 3.0 * u) / (0.5 * self.gamma_tilde)
            }
        }
    }
}

/// `F̃(G) = S(G) χ(|G|)`; defined for every `G`, including `0`.
pub fn s_truncated<const D: usize>(
    g: &Tensor2<D>,
    prof: &TruncationProfile,
    quad: &SphereQuadrature<D>,
) -> Tensor2<D> {
    let chi = prof.chi(g.frobenius());
    if chi == 0.0 {
        return Tensor2::zero();
    }
    let s = s_of_g(g, quad).expect("|G| >= γ̃/2 > 0");
    if chi == 1.0 {
        s
    } else {
        s * chi
    }
}

/// `F̃′(G) = S′(G) χ(|G|) + (G/|G|) ⊗ S(G) χ′(|G|)` in the `∂/∂G_ij` leading
/// index convention.
pub fn s_truncated_prime<const D: usize>(
    g: &Tensor2<D>,
    prof: &TruncationProfile,
    quad: &SphereQuadrature<D>,
) -> Tensor4<D> {
    use crate::tensor::Outer;
    let norm = g.frobenius();
    let chi = prof.chi(norm);
    let dchi = prof.chi_prime(norm);
    if chi == 0.0 && dchi == 0.0 {
        return Tensor4::zero();
    }
    let s = s_of_g(g, quad).expect("|G| > γ̃/2 > 0");
    let sp = s_prime(g, quad).expect("|G| > γ̃/2 > 0");
    sp * chi + (*g * (1.0 / norm)).outer(&s) * dchi
}

/// Which closure the orientation tensor uses for a whole run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Closure {
    /// Truncated Doi–Edwards map `F̃`.
    Full,
    /// Independent alignment.
    Ia,
}

/// Production evaluator for `d = 2`: quadrature, truncation, closure.
#[derive(Debug, Clone)]
pub struct OrientationMap {
    quad: SphereQuadrature<2>,
    profile: TruncationProfile,
    closure: Closure,
}

impl OrientationMap {
    pub fn new(nodes: usize, profile: TruncationProfile, closure: Closure) -> Self {
        Self { quad: SphereQuadrature::circle(nodes), profile, closure }
    }

    pub fn quadrature(&self) -> &SphereQuadrature<2> {
        &self.quad
    }

    pub fn profile(&self) -> &TruncationProfile {
        &self.profile
    }

    pub fn closure(&self) -> Closure {
        self.closure
    }

    pub fn eval(&self, g: &Tensor2<2>) -> Tensor2<2> {
        match self.closure {
            Closure::Full => s_truncated(g, &self.profile, &self.quad),
            Closure::Ia => s_ia(g, &self.quad).unwrap_or_else(|_| Tensor2::zero()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{DoubleDot, Outer};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_g(rng: &mut impl Rng) -> Tensor2<2> {
        Tensor2::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        )
    }

    /// Direct `10⁶`-node trapezoid evaluation of both maps, written without
    /// the even-node reduction or normalization.
    fn hi_res(g: &Tensor2<2>, closure: Closure) -> Tensor2<2> {
        let n = 1_000_000;
        let w = 2.0 * PI / n as f64;
        let (mut a, mut den) = (Tensor2::zero(), 0.0);
        for i in 0..n {
            let th = 2.0 * PI * i as f64 / n as f64;
            let u = Vector::new(th.cos(), th.sin());
            let gu = g.apply(&u);
            let r = gu.frobenius();
            match closure {
                Closure::Full => {
                    a += gu.outer(&gu) * (w / r);
                    den += w * r;
                }
                Closure::Ia => {
                    a += gu.outer(&gu) * (w / (r * r));
                    den += w;
                }
            }
        }
        a * (1.0 / den) - Tensor2::identity() * 0.5
    }

    #[test]
    fn circle_rule_invariants() {
        let q = SphereQuadrature::circle(64);
        for u in q.nodes() {
            assert!((u.frobenius() - 1.0).abs() < 1e-14);
        }
        assert!((q.measure() - 2.0 * PI).abs() < 1e-12 * 2.0 * PI);
        let uu = sphere_average(|u| u.outer(u), &q).unwrap();
        assert!((uu - Tensor2::identity() * PI).max_abs() < 1e-12);
        let m = sphere_average(|_| 1.0, &q).unwrap();
        assert!((m - 2.0 * PI).abs() < 1e-12);
        let odd = sphere_average(|u| *u, &q).unwrap();
        assert!(odd.max_abs() < 1e-14);
    }

    #[test]
    fn sphere_rule_invariants() {
        let q = SphereQuadrature::sphere(8);
        for u in q.nodes() {
            assert!((u.frobenius() - 1.0).abs() < 1e-14);
        }
        assert!((q.measure() - 4.0 * PI).abs() < 1e-12 * 4.0 * PI);
        let uu = sphere_average(|u| u.outer(u), &q).unwrap();
        assert!((uu - Tensor2::identity() * (4.0 * PI / 3.0)).max_abs() < 1e-12);
        assert!(s_of_g(&Tensor2::<3>::identity(), &q).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn sphere_average_rejects_nonfinite() {
        let q = SphereQuadrature::circle(8);
        let r = sphere_average(|u| if u.0[0] > 0.99 { f64::NAN } else { 1.0 }, &q);
        assert_eq!(r, Err(OrientationError::NonFinite { node: 0 }));
    }

    #[test]
    fn isotropic_state_has_zero_orientation() {
        let q = SphereQuadrature::circle(64);
        assert!(s_of_g(&Tensor2::identity(), &q).unwrap().max_abs() < 1e-15);
        assert!(s_ia(&Tensor2::identity(), &q).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn degree_zero_homogeneity() {
        let q = SphereQuadrature::circle(64);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..100 {
            let g = random_g(&mut rng);
            let a = s_of_g(&g, &q).unwrap();
            let b = s_of_g(&(g * 3.7), &q).unwrap();
            assert!((a - b).max_abs() < 1e-14);
            let a = s_ia(&g, &q).unwrap();
            let b = s_ia(&(g * 3.7), &q).unwrap();
            assert!((a - b).max_abs() < 1e-14);
        }
    }

    #[test]
    fn degenerate_input_rejected() {
        let q = SphereQuadrature::circle(16);
        assert!(matches!(s_of_g(&Tensor2::zero(), &q), Err(OrientationError::Degenerate { .. })));
        assert!(matches!(s_prime(&(Tensor2::identity() * 1e-13), &q), Err(OrientationError::Degenerate { .. })));
        assert!(matches!(s_ia(&Tensor2::zero(), &q), Err(OrientationError::Degenerate { .. })));
    }

    #[test]
    fn production_rule_matches_high_resolution_reference() {
        // trapezoid error decays like ((a-b)/(a+b))^{N/2} for singular values a, b
        let g = Tensor2::diag([2.0, 0.5]);
        let s_ref = hi_res(&g, Closure::Full);
        let ia_ref = hi_res(&g, Closure::Ia);
        let q64 = SphereQuadrature::circle(64);
        let s = s_of_g(&g, &q64).unwrap();
        assert!((s - s_ref).max_abs() < 1e-8, "{s:?} vs {s_ref:?}");
        assert!(s.0[0][1].abs() < 1e-15 && s.0[0][0] > 0.0);
        assert!((s_ia(&g, &q64).unwrap() - ia_ref).max_abs() < 1e-6);
        let q128 = SphereQuadrature::circle(128);
        let d = (s_of_g(&g, &q128).unwrap() - s_ref).max_abs();
        let d_ia = (s_ia(&g, &q128).unwrap() - ia_ref).max_abs();
        assert!(d < 1e-12 && d_ia < 1e-11, "{d} {d_ia}");
    }

    #[test]
    fn node_doubling_changes_little() {
        let q64 = SphereQuadrature::circle(64);
        let q128 = SphereQuadrature::circle(128);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        use crate::tensor::Dot;
        let rot = |th: f64| Tensor2::new(th.cos(), -th.sin(), th.sin(), th.cos());
        for _ in 0..50 {
            // singular values with ratio at most 2
            let b: f64 = rng.gen_range(0.1..10.0);
            let a = b * rng.gen_range(1.0..2.0);
            let g = rot(rng.gen_range(0.0..6.3)).dot(&Tensor2::diag([a, b])).dot(&rot(rng.gen_range(0.0..6.3)));
            let d = (s_of_g(&g, &q64).unwrap() - s_of_g(&g, &q128).unwrap()).max_abs();
            assert!(d < 1e-10, "{d}");
        }
    }

    #[test]
    fn trace_free_symmetric_bounded() {
        let q = SphereQuadrature::circle(64);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..10_000 {
            let g = random_g(&mut rng);
            let s = s_of_g(&g, &q).unwrap();
            assert!(s.trace().abs() < 1e-12);
            assert!(s.asymmetry() < 1e-14);
            assert!(s.frobenius() <= s_bound(2) + 1e-8);
        }
    }

    #[test]
    fn rotation_equivariance() {
        let q = SphereQuadrature::circle(64);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..100 {
            let g = random_g(&mut rng) + Tensor2::identity();
            let th: f64 = rng.gen_range(0.0..2.0 * PI);
            let r = Tensor2::new(th.cos(), -th.sin(), th.sin(), th.cos());
            use crate::tensor::Dot;
            let lhs = s_of_g(&r.dot(&g), &q).unwrap();
            let rhs = r.dot(&s_of_g(&g, &q).unwrap()).dot(&r.transpose());
            assert!((lhs - rhs).max_abs() < 1e-9);
        }
    }

    #[test]
    fn derivative_matches_central_differences() {
        let q = SphereQuadrature::circle(64);
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let h = 1e-5;
        for _ in 0..100 {
            let g = random_g(&mut rng) + Tensor2::identity();
            let dir = random_g(&mut rng);
            let fd = (s_of_g(&(g + dir * h), &q).unwrap() - s_of_g(&(g - dir * h), &q).unwrap())
                * (0.5 / h);
            let an = dir.double_dot(&s_prime(&g, &q).unwrap());
            let rel = (fd - an).frobenius() / an.frobenius().max(1e-12);
            assert!(rel < 1e-6, "rel {rel}");
        }
    }

    #[test]
    fn derivative_range_is_symmetric_trace_free() {
        let q = SphereQuadrature::circle(64);
        let h = Tensor2::new(0.0, 1.0, -1.0, 0.0);
        let d = h.double_dot(&s_prime(&Tensor2::identity(), &q).unwrap());
        assert!(d.trace().abs() < 1e-14);
        assert!(d.asymmetry() < 1e-14);
        let h = Tensor2::new(0.3, 0.9, -0.2, -0.5);
        let d = h.double_dot(&s_prime(&Tensor2::diag([1.3, 0.6]), &q).unwrap());
        assert!(d.trace().abs() < 1e-13);
        assert!(d.asymmetry() < 1e-13);
    }

    #[test]
    fn scaled_derivative_has_no_norm_trend() {
        let q = SphereQuadrature::circle(64);
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..100 {
            let g = random_g(&mut rng) + Tensor2::identity() * 0.5;
            let unit = g * (1.0 / g.frobenius());
            let base = s_prime(&unit, &q).unwrap().frobenius();
            for &scale in &[0.1, 1.0, 10.0, 100.0] {
                let gs = unit * scale;
                let v = scale * s_prime(&gs, &q).unwrap().frobenius();
                assert!((v - base).abs() < 1e-10 * base);
            }
        }
    }

    #[test]
    fn linear_response_coefficients() {
        // S(δ + εH) ≈ (3ε/8)(H + Hᵀ − tr H δ), S_IA(δ + εH) ≈ (ε/4)(H + Hᵀ − tr H δ)
        let q = SphereQuadrature::circle(64);
        let h = Tensor2::new(0.2, 1.0, 0.0, -0.1);
        let eps = 1e-6;
        let g = Tensor2::identity() + h * eps;
        let dev = h + h.transpose() - Tensor2::identity() * h.trace();
        let s = s_of_g(&g, &q).unwrap() * (1.0 / eps);
        assert!((s - dev * (3.0 / 8.0)).max_abs() < 1e-5);
        let s = s_ia(&g, &q).unwrap() * (1.0 / eps);
        assert!((s - dev * 0.25).max_abs() < 1e-5);
    }

    #[test]
    fn truncation_profile_shape() {
        let p = TruncationProfile::from_det_floor(1.0).unwrap();
        let gt = p.gamma_tilde();
        assert!((gt - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(p.chi(0.0), 0.0);
        assert_eq!(p.chi(0.5 * gt), 0.0);
        assert_eq!(p.chi(gt), 1.0);
        assert_eq!(p.chi(10.0), 1.0);
        let mut prev = 0.0;
        for i in 0..=2000 {
            let r = gt * i as f64 / 1000.0;
            let c = p.chi(r);
            assert!((0.0..=1.0).contains(&c));
            assert!(c >= prev - 1e-15);
            prev = c;
            assert!(p.chi_prime(r) <= 3.0 / gt);
        }
        // continuity at the joints and derivative consistency
        assert!((p.chi(gt * (1.0 - 1e-9)) - 1.0).abs() < 1e-12);
        let r = 0.8 * gt;
        let fd = (p.chi(r + 1e-6) - p.chi(r - 1e-6)) / 2e-6;
        assert!((fd - p.chi_prime(r)).abs() < 1e-6);
        assert!(TruncationProfile::new(-1.0).is_err());
    }

    #[test]
    fn truncated_map_regions() {
        let q = SphereQuadrature::circle(64);
        let p = TruncationProfile::from_det_floor(0.5).unwrap();
        let gt = p.gamma_tilde();
        assert_eq!(s_truncated(&Tensor2::zero(), &p, &q), Tensor2::zero());
        let g = Tensor2::new(1.0, 0.4, -0.2, 0.3);
        let g2 = g * (2.0 * gt / g.frobenius());
        assert_eq!(s_truncated(&g2, &p, &q), s_of_g(&g2, &q).unwrap());
        let small = g * (0.4 * gt / g.frobenius());
        assert_eq!(s_truncated(&small, &p, &q), Tensor2::zero());
    }

    #[test]
    fn truncated_derivative_globally_bounded() {
        let q = SphereQuadrature::circle(64);
        let p = TruncationProfile::from_det_floor(1.0).unwrap();
        let gt = p.gamma_tilde();
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        // empirical S'_∞ = sup |G||S'(G)| and S_∞
        let mut sp_inf = 0.0_f64;
        let mut samples = Vec::new();
        for _ in 0..2000 {
            let g = random_g(&mut rng);
            if g.frobenius() < 1e-3 {
                continue;
            }
            sp_inf = sp_inf.max(g.frobenius() * s_prime(&g, &q).unwrap().frobenius());
            samples.push(g);
        }
        let bound = (2.0 / gt) * sp_inf + (3.0 / gt) * s_bound(2);
        for g in samples {
            for &scale in &[0.3, 0.6, 0.75, 0.9, 1.2, 3.0] {
                let gs = g * (scale * gt / g.frobenius());
                let d = s_truncated_prime(&gs, &p, &q).frobenius();
                assert!(d <= bound, "{d} > {bound}");
            }
        }
        // derivative consistency in the transition band
        let g = Tensor2::new(0.7, 0.1, 0.2, 0.5) * 1.0;
        let g = g * (0.8 * gt / g.frobenius());
        let dir = Tensor2::new(0.3, -0.2, 0.5, 0.1);
        let h = 1e-6;
        let fd = (s_truncated(&(g + dir * h), &p, &q) - s_truncated(&(g - dir * h), &p, &q)) * (0.5 / h);
        let an = dir.double_dot(&s_truncated_prime(&g, &p, &q));
        assert!((fd - an).max_abs() < 1e-7);
    }
}
