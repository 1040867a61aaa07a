//! Real/complex scalar abstraction and the small set of dense vector kernels
//! shared by every operator and solver in the crate.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

/// Which number field a signal or ensemble lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Field {
    Real,
    Complex,
}

impl Field {
    pub fn as_str(self) -> &'static str {
        match self {
            Field::Real => "real",
            Field::Complex => "complex",
        }
    }
}

pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    const FIELD: Field;

    fn zero() -> Self;
    fn from_real(re: f64) -> Self;
    fn re(self) -> f64;
    fn conj(self) -> Self;
    fn norm_sqr(self) -> f64;
    fn scale(self, s: f64) -> Self;
    fn is_finite(self) -> bool;

    /// Standard Gaussian draw with unit second moment: N(0,1) for reals,
    /// N(0,1/2) + iN(0,1/2) for complex values.
    fn sample_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Multiplies by `e^{i·phase}`; reals only accept `0` and `±π`.
    fn rotate(self, phase: f64) -> Self;

    /// Argument in `(-π, π]`; `0` or `π` for reals.
    fn arg(self) -> f64;

    fn abs(self) -> f64 {
        self.norm_sqr().sqrt()
    }
}

impl Scalar for f64 {
    const FIELD: Field = Field::Real;

    #[inline]
    fn zero() -> Self {
        0.0
    }
    #[inline]
    fn from_real(re: f64) -> Self {
        re
    }
    #[inline]
    fn re(self) -> f64 {
        self
    }
    #[inline]
    fn conj(self) -> Self {
        self
    }
    #[inline]
    fn norm_sqr(self) -> f64 {
        self * self
    }
    #[inline]
    fn scale(self, s: f64) -> Self {
        self * s
    }
    #[inline]
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    fn sample_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }
    fn rotate(self, phase: f64) -> Self {
        if phase == 0.0 {
            self
        } else {
            -self
        }
    }
    fn arg(self) -> f64 {
        if self < 0.0 {
            std::f64::consts::PI
        } else {
            0.0
        }
    }
    #[inline]
    fn abs(self) -> f64 {
        f64::abs(self)
    }
}

impl Scalar for Complex64 {
    const FIELD: Field = Field::Complex;

    #[inline]
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    #[inline]
    fn from_real(re: f64) -> Self {
        Complex64::new(re, 0.0)
    }
    #[inline]
    fn re(self) -> f64 {
        self.re
    }
    #[inline]
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    #[inline]
    fn norm_sqr(self) -> f64 {
        Complex64::norm_sqr(&self)
    }
    #[inline]
    fn scale(self, s: f64) -> Self {
        self * s
    }
    #[inline]
    fn is_finite(self) -> bool {
        Complex64::is_finite(self)
    }
    fn sample_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    }
    fn rotate(self, phase: f64) -> Self {
        self * Complex64::from_polar(1.0, phase)
    }
    fn arg(self) -> f64 {
        Complex64::arg(self)
    }
}

/// Hermitian inner product `⟨x, z⟩ = Σ conj(x_j) z_j`.
pub fn inner<T: Scalar>(x: &[T], z: &[T]) -> T {
    debug_assert_eq!(x.len(), z.len());
    let mut acc = T::zero();
    for (&a, &b) in x.iter().zip(z) {
        acc += a.conj() * b;
    }
    acc
}

pub fn norm_sqr<T: Scalar>(x: &[T]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum()
}

pub fn norm<T: Scalar>(x: &[T]) -> f64 {
    norm_sqr(x).sqrt()
}

/// `y += alpha * x`
pub fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scaled<T: Scalar>(s: f64, x: &[T]) -> Vec<T> {
    x.iter().map(|&v| v.scale(s)).collect()
}

pub fn diff_norm<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&u, &v)| (u - v).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

pub fn all_finite<T: Scalar>(x: &[T]) -> bool {
    x.iter().all(|v| v.is_finite())
}

pub fn sample_gaussian_vector<T: Scalar, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<T> {
    (0..n).map(|_| T::sample_gaussian(rng)).collect()
}
