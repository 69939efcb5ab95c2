//! Small dense tensors of order 1 to 4 over `R^D`.
//!
//! Storage is a fixed-size array so every value lives on the stack. The
//! spatial dimension is a const generic; only `D = 2` and `D = 3` are used.
//! Products follow the index conventions
//!
//! ```text
//! (A ⊗ B)_{i..j..} = a_{i..} b_{j..}
//! (A · B)_{i..j..} = a_{i..k} b_{k j..}
//! (A : B)_{i..j..} = a_{i..k l} b_{k l j..}
//! ```
//!
//! and every order carries the Frobenius norm `|A|^2 = Σ a_{i..}^2`.
//! A mismatch of dimensions between operands is rejected by the type system.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

/// Order-1 tensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vector<const D: usize>(pub [f64; D]);

/// Order-2 tensor, row-major: `self.0[i][j] = a_ij`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tensor2<const D: usize>(pub [[f64; D]; D]);

/// Order-3 tensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tensor3<const D: usize>(pub [[[f64; D]; D]; D]);

/// Order-4 tensor. Derivatives of tensor maps use `t[i][j][k][l] = ∂F_kl / ∂G_ij`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tensor4<const D: usize>(pub [[[[f64; D]; D]; D]; D]);

/// Tensor (A ⊗ B).
pub trait Outer<Rhs> {
    type Output;
    fn outer(&self, rhs: &Rhs) -> Self::Output;
}

/// Single contraction on the last index of `self` and the first of `rhs`.
pub trait Dot<Rhs> {
    type Output;
    fn dot(&self, rhs: &Rhs) -> Self::Output;
}

/// Double contraction on the last two indices of `self` and the first two of `rhs`.
pub trait DoubleDot<Rhs> {
    type Output;
    fn double_dot(&self, rhs: &Rhs) -> Self::Output;
}

/// Operations shared by every tensor order (and by plain scalars), used by
/// generic quadrature code.
pub trait TensorValue: Copy {
    fn zero() -> Self;
    /// `self += a * x`
    fn axpy(&mut self, a: f64, x: &Self);
    fn scaled(&self, a: f64) -> Self;
    fn norm_sq(&self) -> f64;
    fn is_finite(&self) -> bool;

    fn frobenius(&self) -> f64 {
        self.norm_sq().sqrt()
    }
}

impl TensorValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn axpy(&mut self, a: f64, x: &Self) {
        *self += a * x;
    }
    fn scaled(&self, a: f64) -> Self {
        self * a
    }
    fn norm_sq(&self) -> f64 {
        self * self
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

macro_rules! flat_impl {
    ($ty:ident, $zero:expr, $iter:ident, $iter_mut:ident) => {
        impl<const D: usize> $ty<D> {
            pub fn zero() -> Self {
                $zero
            }

            fn $iter(&self) -> impl Iterator<Item = &f64> {
                self.0.as_flattened_iter()
            }

            fn $iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
                self.0.as_flattened_iter_mut()
            }

            pub fn frobenius(&self) -> f64 {
                self.norm_sq().sqrt()
            }

            pub fn norm_sq(&self) -> f64 {
                self.$iter().map(|a| a * a).sum()
            }

            pub fn is_finite(&self) -> bool {
                self.$iter().all(|a| a.is_finite())
            }

            pub fn max_abs(&self) -> f64 {
                self.$iter().fold(0.0_f64, |m, a| m.max(a.abs()))
            }

            pub fn dim(&self) -> usize {
                D
            }
        }

        impl<const D: usize> TensorValue for $ty<D> {
            fn zero() -> Self {
                $zero
            }
            fn axpy(&mut self, a: f64, x: &Self) {
                for (s, v) in self.$iter_mut().zip(x.$iter()) {
                    *s += a * v;
                }
            }
            fn scaled(&self, a: f64) -> Self {
                let mut out = *self;
                out.$iter_mut().for_each(|v| *v *= a);
                out
            }
            fn norm_sq(&self) -> f64 {
                $ty::norm_sq(self)
            }
            fn is_finite(&self) -> bool {
                $ty::is_finite(self)
            }
        }

        impl<const D: usize> Add for $ty<D> {
            type Output = Self;
            fn add(mut self, rhs: Self) -> Self {
                self += rhs;
                self
            }
        }

        impl<const D: usize> Sub for $ty<D> {
            type Output = Self;
            fn sub(mut self, rhs: Self) -> Self {
                self -= rhs;
                self
            }
        }

        impl<const D: usize> AddAssign for $ty<D> {
            fn add_assign(&mut self, rhs: Self) {
                for (s, v) in self.$iter_mut().zip(rhs.$iter()) {
                    *s += v;
                }
            }
        }

        impl<const D: usize> SubAssign for $ty<D> {
            fn sub_assign(&mut self, rhs: Self) {
                for (s, v) in self.$iter_mut().zip(rhs.$iter()) {
                    *s -= v;
                }
            }
        }

        impl<const D: usize> Mul<f64> for $ty<D> {
            type Output = Self;
            fn mul(self, a: f64) -> Self {
                TensorValue::scaled(&self, a)
            }
        }

        impl<const D: usize> Mul<$ty<D>> for f64 {
            type Output = $ty<D>;
            fn mul(self, t: $ty<D>) -> $ty<D> {
                TensorValue::scaled(&t, self)
            }
        }

        impl<const D: usize> Neg for $ty<D> {
            type Output = Self;
            fn neg(self) -> Self {
                TensorValue::scaled(&self, -1.0)
            }
        }
    };
}

/// Flat iteration over nested fixed-size arrays.
trait Flatten {
    fn as_flattened_iter(&self) -> impl Iterator<Item = &f64>;
    fn as_flattened_iter_mut(&mut self) -> impl Iterator<Item = &mut f64>;
}

impl<const D: usize> Flatten for [f64; D] {
    fn as_flattened_iter(&self) -> impl Iterator<Item = &f64> {
        self.iter()
    }
    fn as_flattened_iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.iter_mut()
    }
}

impl<const D: usize> Flatten for [[f64; D]; D] {
    fn as_flattened_iter(&self) -> impl Iterator<Item = &f64> {
        self.iter().flatten()
    }
    fn as_flattened_iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.iter_mut().flatten()
    }
}

impl<const D: usize> Flatten for [[[f64; D]; D]; D] {
    fn as_flattened_iter(&self) -> impl Iterator<Item = &f64> {
        self.iter().flatten().flatten()
    }
    fn as_flattened_iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.iter_mut().flatten().flatten()
    }
}

impl<const D: usize> Flatten for [[[[f64; D]; D]; D]; D] {
    fn as_flattened_iter(&self) -> impl Iterator<Item = &f64> {
        self.iter().flatten().flatten().flatten()
    }
    fn as_flattened_iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.iter_mut().flatten().flatten().flatten()
    }
}

flat_impl!(Vector, Vector([0.0; D]), flat, flat_mut);
flat_impl!(Tensor2, Tensor2([[0.0; D]; D]), flat, flat_mut);
flat_impl!(Tensor3, Tensor3([[[0.0; D]; D]; D]), flat, flat_mut);
flat_impl!(Tensor4, Tensor4([[[[0.0; D]; D]; D]; D]), flat, flat_mut);

impl<const D: usize> Index<usize> for Vector<D> {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl<const D: usize> IndexMut<usize> for Vector<D> {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl<const D: usize> Index<(usize, usize)> for Tensor2<D> {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.0[i][j]
    }
}

impl<const D: usize> IndexMut<(usize, usize)> for Tensor2<D> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.0[i][j]
    }
}

impl<const D: usize> Vector<D> {
    pub fn basis(i: usize) -> Self {
        let mut v = Self::zero();
        v.0[i] = 1.0;
        v
    }

    pub fn inner(&self, rhs: &Self) -> f64 {
        self.0.iter().zip(rhs.0.iter()).map(|(a, b)| a * b).sum()
    }
}

impl Vector<2> {
    pub fn new(x: f64, y: f64) -> Self {
        Vector([x, y])
    }
}

impl<const D: usize> Tensor2<D> {
    /// The identity δ.
    pub fn identity() -> Self {
        let mut t = Self::zero();
        for i in 0..D {
            t.0[i][i] = 1.0;
        }
        t
    }

    pub fn diag(d: [f64; D]) -> Self {
        let mut t = Self::zero();
        for i in 0..D {
            t.0[i][i] = d[i];
        }
        t
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zero();
        for i in 0..D {
            for j in 0..D {
                t.0[i][j] = self.0[j][i];
            }
        }
        t
    }

    pub fn trace(&self) -> f64 {
        (0..D).map(|i| self.0[i][i]).sum()
    }

    /// Largest entry of `|A - Aᵀ|`.
    pub fn asymmetry(&self) -> f64 {
        let mut m = 0.0_f64;
        for i in 0..D {
            for j in 0..i {
                m = m.max((self.0[i][j] - self.0[j][i]).abs());
            }
        }
        m
    }

    pub fn det(&self) -> f64 {
        let a = &self.0;
        match D {
            1 => a[0][0],
            2 => a[0][0] * a[1][1] - a[0][1] * a[1][0],
            3 => {
                a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
                    - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
                    + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
            }
            _ => unreachable!("determinant only for d <= 3"),
        }
    }

    pub fn apply(&self, u: &Vector<D>) -> Vector<D> {
        self.dot(u)
    }
}

impl Tensor2<2> {
    pub fn new(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Tensor2([[a11, a12], [a21, a22]])
    }

    /// Matrix exponential of a 2×2 tensor in closed form.
    ///
    /// Writing `A = (tr A / 2) δ + B` with `B` trace-free, `B² = -det(B) δ`,
    /// so `exp A = e^{tr A/2} (c(q) δ + s(q) B)` with `q = -det B`.
    pub fn exp(&self) -> Self {
        let half_tr = 0.5 * self.trace();
        let b = *self - Tensor2::identity() * half_tr;
        let q = -b.det();
        let (c, s) = if q > 1e-8 {
            let r = q.sqrt();
            (r.cosh(), r.sinh() / r)
        } else if q < -1e-8 {
            let r = (-q).sqrt();
            (r.cos(), r.sin() / r)
        } else {
            // Taylor series in q, exact to rounding for |q| <= 1e-8.
            (
                1.0 + q / 2.0 + q * q / 24.0,
                1.0 + q / 6.0 + q * q / 120.0,
            )
        };
        let scale = half_tr.exp();
        (Tensor2::identity() * c + b * s) * scale
    }
}

// ---- outer products ----

impl<const D: usize> Outer<Vector<D>> for Vector<D> {
    type Output = Tensor2<D>;
    fn outer(&self, rhs: &Vector<D>) -> Tensor2<D> {
        let mut t = Tensor2::zero();
        for i in 0..D {
            for j in 0..D {
                t.0[i][j] = self.0[i] * rhs.0[j];
            }
        }
        t
    }
}

impl<const D: usize> Outer<Tensor2<D>> for Vector<D> {
    type Output = Tensor3<D>;
    fn outer(&self, rhs: &Tensor2<D>) -> Tensor3<D> {
        let mut t = Tensor3::zero();
        for i in 0..D {
            for j in 0..D {
                for k in 0..D {
                    t.0[i][j][k] = self.0[i] * rhs.0[j][k];
                }
            }
        }
        t
    }
}

impl<const D: usize> Outer<Vector<D>> for Tensor2<D> {
    type Output = Tensor3<D>;
    fn outer(&self, rhs: &Vector<D>) -> Tensor3<D> {
        let mut t = Tensor3::zero();
        for i in 0..D {
            for j in 0..D {
                for k in 0..D {
                    t.0[i][j][k] = self.0[i][j] * rhs.0[k];
                }
            }
        }
        t
    }
}

impl<const D: usize> Outer<Tensor2<D>> for Tensor2<D> {
    type Output = Tensor4<D>;
    fn outer(&self, rhs: &Tensor2<D>) -> Tensor4<D> {
        let mut t = Tensor4::zero();
        for i in 0..D {
            for j in 0..D {
                for k in 0..D {
                    for l in 0..D {
                        t.0[i][j][k][l] = self.0[i][j] * rhs.0[k][l];
                    }
                }
            }
        }
        t
    }
}

impl<const D: usize> Outer<Vector<D>> for Tensor3<D> {
    type Output = Tensor4<D>;
    fn outer(&self, rhs: &Vector<D>) -> Tensor4<D> {
        let mut t = Tensor4::zero();
        for i in 0..D {
            for j in 0..D {
                for k in 0..D {
                    for l in 0..D {
                        t.0[i][j][k][l] = self.0[i][j][k] * rhs.0[l];
                    }
                }
            }
        }
        t
    }
}

// ---- single contractions ----

impl<const D: usize> Dot<Vector<D>> for Vector<D> {
    type Output = f64;
    fn dot(&self, rhs: &Vector<D>) -> f64 {
        self.inner(rhs)
    }
}

impl<const D: usize> Dot<Vector<D>> for Tensor2<D> {
    type Output = Vector<D>;
    fn dot(&self, rhs: &Vector<D>) -> Vector<D> {
        let mut v = Vector::zero();
        for i in 0..D {
            v.0[i] = (0..D).map(|k| self.0[i][k] * rhs.0[k]).sum();
        }
        v
    }
}

impl<const D: usize> Dot<Tensor2<D>> for Vector<D> {
    type Output = Vector<D>;
    fn dot(&self, rhs: &Tensor2<D>) -> Vector<D> {
        let mut v = Vector::zero();
        for j in 0..D {
            v.0[j] = (0..D).map(|k| self.0[k] * rhs.0[k][j]).sum();
        }
        v
    }
}

impl<const D: usize> Dot<Tensor2<D>> for Tensor2<D> {
    type Output = Tensor2<D>;
    fn dot(&self, rhs: &Tensor2<D>) -> Tensor2<D> {
        let mut t = Tensor2::zero();
        for i in 0..D {
            for j in 0..D {
                t.0[i][j] = (0..D).map(|k| self.0[i][k] * rhs.0[k][j]).sum();
            }
        }
        t
    }
}

impl<const D: usize> Dot<Vector<D>> for Tensor3<D> {
    type Output = Tensor2<D>;
    fn dot(&self, rhs: &Vector<D>) -> Tensor2<D> {
        let mut t = Tensor2::zero();
        for i in 0..D {
            for j in 0..D {
                t.0[i][j] = (0..D).map(|k| self.0[i][j][k] * rhs.0[k]).sum();
            }
        }
        t
    }
}

impl<const D: usize> Dot<Tensor2<D>> for Tensor3<D> {
    type Output = Tensor3<D>;
    fn dot(&self, rhs: &Tensor2<D>) -> Tensor3<D> {
        let mut t = Tensor3::zero();
        for i in 0..D {
            for j in 0..D {
                for l in 0..D {
                    t.0[i][j][l] = (0..D).map(|k| self.0[i][j][k] * rhs.0[k][l]).sum();
                }
            }
        }
        t
    }
}

impl<const D: usize> Dot<Tensor2<D>> for Tensor4<D> {
    type Output = Tensor4<D>;
    fn dot(&self, rhs: &Tensor2<D>) -> Tensor4<D> {
        let mut t = Tensor4::zero();
        for i in 0..D {
            for j in 0..D {
                for k in 0..D {
                    for l in 0..D {
                        t.0[i][j][k][l] =
                            (0..D).map(|m| self.0[i][j][k][m] * rhs.0[m][l]).sum();
                    }
                }
            }
        }
        t
    }
}

// ---- double contractions ----

impl<const D: usize> DoubleDot<Tensor2<D>> for Tensor2<D> {
    type Output = f64;
    fn double_dot(&self, rhs: &Tensor2<D>) -> f64 {
        let mut s = 0.0;
        for k in 0..D {
            for l in 0..D {
                s += self.0[k][l] * rhs.0[k][l];
            }
        }
        s
    }
}

impl<const D: usize> DoubleDot<Tensor2<D>> for Tensor3<D> {
    type Output = Vector<D>;
    fn double_dot(&self, rhs: &Tensor2<D>) -> Vector<D> {
        let mut v = Vector::zero();
        for i in 0..D {
            let mut s = 0.0;
            for k in 0..D {
                for l in 0..D {
                    s += self.0[i][k][l] * rhs.0[k][l];
                }
            }
            v.0[i] = s;
        }
        v
    }
}

impl<const D: usize> DoubleDot<Tensor3<D>> for Tensor2<D> {
    type Output = Vector<D>;
    fn double_dot(&self, rhs: &Tensor3<D>) -> Vector<D> {
        let mut v = Vector::zero();
        for j in 0..D {
            let mut s = 0.0;
            for k in 0..D {
                for l in 0..D {
                    s += self.0[k][l] * rhs.0[k][l][j];
                }
            }
            v.0[j] = s;
        }
        v
    }
}

impl<const D: usize> DoubleDot<Tensor2<D>> for Tensor4<D> {
    type Output = Tensor2<D>;
    fn double_dot(&self, rhs: &Tensor2<D>) -> Tensor2<D> {
        let mut t = Tensor2::zero();
        for i in 0..D {
            for j in 0..D {
                let mut s = 0.0;
                for k in 0..D {
                    for l in 0..D {
                        s += self.0[i][j][k][l] * rhs.0[k][l];
                    }
                }
                t.0[i][j] = s;
            }
        }
        t
    }
}

impl<const D: usize> DoubleDot<Tensor4<D>> for Tensor2<D> {
    type Output = Tensor2<D>;
    fn double_dot(&self, rhs: &Tensor4<D>) -> Tensor2<D> {
        let mut t = Tensor2::zero();
        for k in 0..D {
            for l in 0..D {
                let mut s = 0.0;
                for i in 0..D {
                    for j in 0..D {
                        s += self.0[i][j] * rhs.0[i][j][k][l];
                    }
                }
                t.0[k][l] = s;
            }
        }
        t
    }
}

impl<const D: usize> DoubleDot<Tensor4<D>> for Tensor4<D> {
    type Output = Tensor4<D>;
    fn double_dot(&self, rhs: &Tensor4<D>) -> Tensor4<D> {
        let mut t = Tensor4::zero();
        for i in 0..D {
            for j in 0..D {
                for m in 0..D {
                    for n in 0..D {
                        let mut s = 0.0;
                        for k in 0..D {
                            for l in 0..D {
                                s += self.0[i][j][k][l] * rhs.0[k][l][m][n];
                            }
                        }
                        t.0[i][j][m][n] = s;
                    }
                }
            }
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_t2(rng: &mut impl Rng) -> Tensor2<2> {
        Tensor2::new(
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
        )
    }

    #[test]
    fn outer_of_basis_vectors() {
        let e1 = Vector::<2>::basis(0);
        let t = e1.outer(&e1);
        assert_eq!(t, Tensor2::new(1.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn outer_of_unit_vector_is_rank_one_with_unit_trace() {
        let th = 0.37_f64;
        let u = Vector::new(th.cos(), th.sin());
        let t = u.outer(&u);
        assert!((t.trace() - 1.0).abs() < 1e-15);
        assert_eq!(t.asymmetry(), 0.0);
        assert!(t.det().abs() < 1e-16);
    }

    #[test]
    fn outer_norm_factorizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let a = rand_t2(&mut rng);
            let b = rand_t2(&mut rng);
            let n = a.outer(&b).frobenius();
            assert!((n - a.frobenius() * b.frobenius()).abs() < 1e-13 * (1.0 + n));
            let u = Vector::new(rng.gen(), rng.gen());
            let n3 = a.outer(&u).frobenius();
            assert!((n3 - a.frobenius() * u.frobenius()).abs() < 1e-13 * (1.0 + n3));
            let n4 = a.outer(&u).outer(&u).frobenius();
            assert!((n4 - a.frobenius() * u.norm_sq()).abs() < 1e-13 * (1.0 + n4));
        }
    }

    #[test]
    fn identity_and_diagonal_action() {
        let g = Tensor2::new(1.2, -0.3, 0.7, 2.0);
        assert_eq!(Tensor2::identity().dot(&g), g);
        let d = Tensor2::diag([2.0, 0.5]);
        assert_eq!(d.dot(&Vector::new(1.0, 0.0)), Vector::new(2.0, 0.0));
    }

    #[test]
    fn dot_is_associative() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let (a, b, c) = (rand_t2(&mut rng), rand_t2(&mut rng), rand_t2(&mut rng));
            let l = a.dot(&b.dot(&c));
            let r = a.dot(&b).dot(&c);
            assert!((l - r).max_abs() < 1e-13);
        }
    }

    #[test]
    fn identity_metrics() {
        let d2 = Tensor2::<2>::identity();
        assert_eq!(d2.det(), 1.0);
        assert_eq!(d2.trace(), 2.0);
        assert_eq!(d2.frobenius(), 2f64.sqrt());
        assert_eq!(d2.double_dot(&d2), 2.0);
        let d3 = Tensor2::<3>::identity();
        assert_eq!(d3.det(), 1.0);
        assert_eq!(d3.double_dot(&d3), 3.0);
        assert_eq!(d3.frobenius(), 3f64.sqrt());
        assert_eq!(Tensor2::diag([2.0, 0.5]).det(), 1.0);
    }

    #[test]
    fn double_dot_matches_index_expansion() {
        // ∇v = κ e1⊗e2, S symmetric: ∇v : S = Σ_kl (∇v)_kl S_kl = κ S_12
        let kappa = 0.8;
        let grad = Tensor2::new(0.0, kappa, 0.0, 0.0);
        let s = Tensor2::new(0.3, -0.45, -0.45, -0.3);
        let mut expanded = 0.0;
        for k in 0..2 {
            for l in 0..2 {
                expanded += grad.0[k][l] * s.0[k][l];
            }
        }
        assert_eq!(grad.double_dot(&s), expanded);
        assert!((grad.double_dot(&s) - kappa * (-0.45)).abs() < 1e-16);
    }

    #[test]
    fn double_dot_self_is_norm_squared() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let a = rand_t2(&mut rng);
            assert!((a.double_dot(&a) - a.norm_sq()).abs() < 1e-14);
        }
    }

    #[test]
    fn arithmetic_geometric_mean_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10_000 {
            let g = rand_t2(&mut rng);
            assert!(g.norm_sq() >= 2.0 * g.det().abs() - 1e-14);
        }
    }

    #[test]
    fn order_four_contractions_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (a, b, h) = (rand_t2(&mut rng), rand_t2(&mut rng), rand_t2(&mut rng));
        let t4 = a.outer(&b);
        // (A ⊗ B) : H = A (B : H)
        let lhs = t4.double_dot(&h);
        let rhs = a * b.double_dot(&h);
        assert!((lhs - rhs).max_abs() < 1e-13);
        // H : (A ⊗ B) = (H : A) B
        let lhs = h.double_dot(&t4);
        let rhs = b * h.double_dot(&a);
        assert!((lhs - rhs).max_abs() < 1e-13);
    }

    #[test]
    fn exp_of_nilpotent_shear_is_exact() {
        let a = Tensor2::new(0.0, 0.7, 0.0, 0.0);
        assert_eq!(a.exp(), Tensor2::new(1.0, 0.7, 0.0, 1.0));
    }

    #[test]
    fn exp_matches_series_and_preserves_det() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..200 {
            let mut a = rand_t2(&mut rng) * 0.5;
            // series reference
            let mut term = Tensor2::identity();
            let mut sum = Tensor2::identity();
            for n in 1..40 {
                term = term.dot(&a) * (1.0 / n as f64);
                sum += term;
            }
            assert!((a.exp() - sum).max_abs() < 1e-12 * (1.0 + sum.max_abs()));
            // trace-free part has unit determinant exponential
            let tr = a.trace() / 2.0;
            a.0[0][0] -= tr;
            a.0[1][1] -= tr;
            assert!((a.exp().det() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn finiteness_flag() {
        let mut t = Tensor2::<2>::identity();
        assert!(t.is_finite());
        t.0[1][0] = f64::NAN;
        assert!(!t.is_finite());
    }
}
