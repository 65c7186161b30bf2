//! Scalar field abstraction shared by the dense, traffic and experiment code.
//!
//! Every matrix and trace routine is generic over [`Scalar`]; floating point
//! (`f32`, `f64`, complex) and exact rationals (`Ratio<i64>`, `BigRational`)
//! all implement it. Exact types make identities checkable with zero
//! tolerance.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::{BigRational, Ratio};
use num_traits::{Num, ToPrimitive};

pub trait Scalar: Num + Clone + Debug + PartialEq + Send + Sync + 'static {
    /// Complex conjugate; identity on real types.
    fn conj(&self) -> Self;

    fn from_i64(v: i64) -> Self;

    /// Lossy view used for reporting and float comparisons.
    fn to_c64(&self) -> Complex<f64>;

    /// Conversion from a complex double. `None` when the value is not representable,
    /// e.g. a nonzero imaginary part for a real type or a non-finite float.
    fn from_parts(re: f64, im: f64) -> Option<Self>;

    /// `true` when the type performs exact arithmetic.
    fn is_exact() -> bool {
        false
    }

    fn modulus(&self) -> f64 {
        self.to_c64().norm()
    }

    /// `|self|^2` in the field itself (`self * conj(self)`).
    fn norm_sqr(&self) -> Self {
        self.clone() * self.conj()
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        Self::from_i64(num) / Self::from_i64(den)
    }

    /// Equality for exact types, `|a - b| <= tol` for floats.
    fn close_to(&self, other: &Self, tol: f64) -> bool {
        if Self::is_exact() {
            self == other
        } else {
            (self.to_c64() - other.to_c64()).norm() <= tol
        }
    }
}

impl Scalar for f64 {
    fn conj(&self) -> Self {
        *self
    }
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn from_parts(re: f64, im: f64) -> Option<Self> {
        (im == 0.0).then_some(re)
    }
    fn to_c64(&self) -> Complex<f64> {
        Complex::new(*self, 0.0)
    }
}

impl Scalar for f32 {
    fn conj(&self) -> Self {
        *self
    }
    fn from_i64(v: i64) -> Self {
        v as f32
    }
    fn from_parts(re: f64, im: f64) -> Option<Self> {
        (im == 0.0).then_some(re as f32)
    }
    fn to_c64(&self) -> Complex<f64> {
        Complex::new(*self as f64, 0.0)
    }
}

impl Scalar for Complex<f64> {
    fn conj(&self) -> Self {
        Complex::conj(self)
    }
    fn from_i64(v: i64) -> Self {
        Complex::new(v as f64, 0.0)
    }
    fn from_parts(re: f64, im: f64) -> Option<Self> {
        Some(Complex::new(re, im))
    }
    fn to_c64(&self) -> Complex<f64> {
        *self
    }
}

impl Scalar for Complex<f32> {
    fn conj(&self) -> Self {
        Complex::conj(self)
    }
    fn from_i64(v: i64) -> Self {
        Complex::new(v as f32, 0.0)
    }
    fn from_parts(re: f64, im: f64) -> Option<Self> {
        Some(Complex::new(re as f32, im as f32))
    }
    fn to_c64(&self) -> Complex<f64> {
        Complex::new(self.re as f64, self.im as f64)
    }
}

impl Scalar for Ratio<i64> {
    fn conj(&self) -> Self {
        *self
    }
    fn from_i64(v: i64) -> Self {
        Ratio::from_integer(v)
    }
    fn from_parts(re: f64, im: f64) -> Option<Self> {
        if im != 0.0 {
            return None;
        }
        Ratio::<i64>::approximate_float(re)
    }
    fn to_c64(&self) -> Complex<f64> {
        Complex::new(self.to_f64().unwrap_or(f64::NAN), 0.0)
    }
    fn is_exact() -> bool {
        true
    }
}

impl Scalar for BigRational {
    fn conj(&self) -> Self {
        self.clone()
    }
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
    fn from_parts(re: f64, im: f64) -> Option<Self> {
        if im != 0.0 {
            return None;
        }
        BigRational::from_float(re)
    }
    fn to_c64(&self) -> Complex<f64> {
        Complex::new(self.to_f64().unwrap_or(f64::NAN), 0.0)
    }
    fn is_exact() -> bool {
        true
    }
}

/// `base^exp` in the scalar field.
pub fn pow_usize<T: Scalar>(base: &T, exp: usize) -> T {
    let mut acc = T::one();
    for _ in 0..exp {
        acc = acc * base.clone();
    }
    acc
}

/// `(m - k)! / m!`, i.e. the reciprocal of the falling factorial `m (m-1) ... (m-k+1)`.
/// Zero when `k > m`: no injective assignment of `k` points into `m` exists.
pub fn falling_factorial_ratio<T: Scalar>(m: u128, k: usize) -> T {
    if k as u128 > m {
        return T::zero();
    }
    let mut denom = T::one();
    for j in 0..k as u128 {
        denom = denom * T::from_i64((m - j) as i64);
    }
    T::one() / denom
}

/// `m (m-1) ... (m-k+1)` as an integer, zero when `k > m`.
pub fn falling_factorial(m: u128, k: usize) -> u128 {
    if k as u128 > m {
        return 0;
    }
    (0..k as u128).fold(1u128, |acc, j| acc.saturating_mul(m - j))
}
