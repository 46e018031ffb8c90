//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real floating point scalar (`f32` or `f64`).
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    /// Converts a count or index into `Self`.
    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn half() -> Self {
        Self::lit(0.5)
    }

    #[inline]
    fn two() -> Self {
        Self::lit(2.0)
    }

    /// Lossy conversion used for reporting.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// A point in the plane.
pub type Point<T> = [T; 2];

/// A symmetric 2x2 tensor stored row-major.
pub type Tensor<T> = [[T; 2]; 2];

#[inline]
pub(crate) fn dot<T: Real>(a: Point<T>, b: Point<T>) -> T {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub(crate) fn norm2<T: Real>(a: Point<T>) -> T {
    a[0].hypot(a[1])
}

#[inline]
pub(crate) fn sub<T: Real>(a: Point<T>, b: Point<T>) -> Point<T> {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub(crate) fn mat_vec<T: Real>(m: &Tensor<T>, v: Point<T>) -> Point<T> {
    [
        m[0][0] * v[0] + m[0][1] * v[1],
        m[1][0] * v[0] + m[1][1] * v[1],
    ]
}

/// `n^T A n`.
#[inline]
pub(crate) fn quad_form<T: Real>(m: &Tensor<T>, n: Point<T>) -> T {
    dot(n, mat_vec(m, n))
}

/// Frobenius inner product `A : H`.
#[inline]
pub(crate) fn double_dot<T: Real>(a: &Tensor<T>, h: &Tensor<T>) -> T {
    a[0][0] * h[0][0] + a[0][1] * h[0][1] + a[1][0] * h[1][0] + a[1][1] * h[1][1]
}

/// Eigenvalues of a symmetric 2x2 tensor, ascending.
pub fn sym_eigenvalues<T: Real>(m: &Tensor<T>) -> (T, T) {
    let off = T::half() * (m[0][1] + m[1][0]);
    let mean = T::half() * (m[0][0] + m[1][1]);
    let diff = T::half() * (m[0][0] - m[1][1]);
    let rad = diff.hypot(off);
    (mean - rad, mean + rad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_of_diagonal_and_rotated() {
        let (lo, hi) = sym_eigenvalues(&[[5.0, 0.0], [0.0, 1.0]]);
        assert!((lo - 1.0_f64).abs() < 1e-15 && (hi - 5.0).abs() < 1e-15);
        // [[2,1],[1,2]] has eigenvalues 1 and 3
        let (lo, hi) = sym_eigenvalues(&[[2.0, 1.0], [1.0, 2.0]]);
        assert!((lo - 1.0_f64).abs() < 1e-15 && (hi - 3.0).abs() < 1e-15);
        let (lo, _) = sym_eigenvalues(&[[1.0_f32, 0.0], [0.0, -1e-3]]);
        assert!(lo < 0.0);
    }
}
