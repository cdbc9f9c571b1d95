//! Radial functors and single-particle-orbital (SPO) sets.

mod bspline1d;
mod planewave;
mod tricubic;

pub use bspline1d::CubicBspline1D;
pub use planewave::{PlaneWaveSPOSet, Phase};
pub use tricubic::TricubicSPOSet;

use crate::vec3::Vec3;
use crate::Real;

/// Segment basis of the uniform cubic B-spline at parameter `t` in [0, 1).
#[inline(always)]
pub(crate) fn bspline1d_basis<T: Real>(t: T) -> [T; 4] {
    let one = T::one();
    let sixth = T::from_f64(1.0 / 6.0);
    let omt = one - t;
    let t2 = t * t;
    let t3 = t2 * t;
    [
        sixth * omt * omt * omt,
        sixth * (T::from_f64(3.0) * t3 - T::from_f64(6.0) * t2 + T::from_f64(4.0)),
        sixth * (T::from_f64(-3.0) * t3 + T::from_f64(3.0) * t2 + T::from_f64(3.0) * t + one),
        sixth * t3,
    ]
}

/// d/dt of the segment basis.
#[inline(always)]
pub(crate) fn bspline1d_basis_d1<T: Real>(t: T) -> [T; 4] {
    let half = T::from_f64(0.5);
    let omt = T::one() - t;
    let t2 = t * t;
    [
        -half * omt * omt,
        half * (T::from_f64(3.0) * t2 - T::from_f64(4.0) * t),
        half * (T::from_f64(-3.0) * t2 + T::from_f64(2.0) * t + T::one()),
        half * t2,
    ]
}

/// d2/dt2 of the segment basis.
#[inline(always)]
pub(crate) fn bspline1d_basis_d2<T: Real>(t: T) -> [T; 4] {
    [
        T::one() - t,
        T::from_f64(3.0) * t - T::from_f64(2.0),
        T::one() - T::from_f64(3.0) * t,
        t,
    ]
}

/// Caller-provided output buffers for one vgh evaluation: values, gradient
/// components, and the six unique hessian components (xx, xy, xz, yy, yz,
/// zz). The laplacian of orbital `o` is `h[0][o] + h[3][o] + h[5][o]`.
#[derive(Debug, Clone)]
pub struct SpoScratch<T: Real> {
    pub v: Vec<T>,
    pub g: [Vec<T>; 3],
    pub h: [Vec<T>; 6],
}

impl<T: Real> SpoScratch<T> {
    pub fn new(n_lanes: usize) -> Self {
        let z = vec![T::zero(); n_lanes];
        Self {
            v: z.clone(),
            g: [z.clone(), z.clone(), z.clone()],
            h: [z.clone(), z.clone(), z.clone(), z.clone(), z.clone(), z],
        }
    }

    pub(crate) fn clear(&mut self, n: usize) {
        self.v[..n].fill(T::zero());
        for g in &mut self.g {
            g[..n].fill(T::zero());
        }
        for h in &mut self.h {
            h[..n].fill(T::zero());
        }
    }

    #[inline]
    pub fn laplacian(&self, o: usize) -> T {
        self.h[0][o] + self.h[3][o] + self.h[5][o]
    }

    #[inline]
    pub fn gradient(&self, o: usize) -> Vec3<T> {
        [self.g[0][o], self.g[1][o], self.g[2][o]]
    }
}

/// A set of single-particle orbitals evaluated at a point.
///
/// Tables are immutable after construction and shared read-only across
/// threads; evaluation is reentrant with caller-provided buffers.
pub trait SpoSet<T: Real>: Send + Sync {
    /// Logical orbital count.
    fn n_orb(&self) -> usize;

    /// Padded lane count; output buffers must hold at least this many slots.
    fn n_lanes(&self) -> usize {
        self.n_orb()
    }

    /// Values of all orbitals at `pos`.
    fn eval_v(&self, pos: Vec3<T>, values: &mut [T]);

    /// Values, gradients and hessians of all orbitals at `pos`.
    fn eval_vgh(&self, pos: Vec3<T>, out: &mut SpoScratch<T>);
}
