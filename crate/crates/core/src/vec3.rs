//! Small fixed-dimension vector helpers used by all kernels.
//!
//! Positions, displacements and gradients are plain `[T; 3]` arrays so the
//! compiler sees flat scalar math; nothing here allocates.

use crate::Real;

pub type Vec3<T> = [T; 3];

#[inline(always)]
pub fn zero<T: Real>() -> Vec3<T> {
    [T::zero(); 3]
}

#[inline(always)]
pub fn add<T: Real>(a: Vec3<T>, b: Vec3<T>) -> Vec3<T> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline(always)]
pub fn sub<T: Real>(a: Vec3<T>, b: Vec3<T>) -> Vec3<T> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline(always)]
pub fn scale<T: Real>(a: Vec3<T>, s: T) -> Vec3<T> {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline(always)]
pub fn dot<T: Real>(a: Vec3<T>, b: Vec3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline(always)]
pub fn norm2<T: Real>(a: Vec3<T>) -> T {
    dot(a, a)
}

#[inline(always)]
pub fn norm<T: Real>(a: Vec3<T>) -> T {
    norm2(a).sqrt()
}

#[inline(always)]
pub fn to_f64<T: Real>(a: Vec3<T>) -> Vec3<f64> {
    [a[0].to_f64(), a[1].to_f64(), a[2].to_f64()]
}

#[inline(always)]
pub fn from_f64<T: Real>(a: Vec3<f64>) -> Vec3<T> {
    [T::from_f64(a[0]), T::from_f64(a[1]), T::from_f64(a[2])]
}
