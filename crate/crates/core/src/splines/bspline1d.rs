//! One-dimensional cubic B-spline radial functors.
//!
//! These back every radial function in the pipeline: one-body and two-body
//! Jastrow terms and the nonlocal pseudopotential channels. A functor is an
//! interpolating spline on a uniform grid over `[0, r_cut]` that is
//! identically zero at and beyond the cutoff.

use super::{bspline1d_basis as basis, bspline1d_basis_d1 as basis_d1, bspline1d_basis_d2 as basis_d2};
use crate::error::{QmcError, Result};
use crate::Real;

/// Radial cubic B-spline functor with a hard cutoff.
#[derive(Debug, Clone)]
pub struct CubicBspline1D<T: Real> {
    r_cut: T,
    inv_delta: T,
    intervals: usize,
    /// m + 3 control coefficients; index i+1 is centered on knot i.
    coeffs: Vec<T>,
}

impl<T: Real> CubicBspline1D<T> {
    /// Natural-cubic-spline interpolation of `u` at the grid knots, with the
    /// value at `r_cut` forced to zero.
    pub fn fit(u: impl Fn(f64) -> f64, r_cut: f64, intervals: usize) -> Result<Self> {
        if intervals < 4 {
            return Err(QmcError::InvalidArgument(format!(
                "need at least 4 grid intervals, got {intervals}"
            )));
        }
        if !(r_cut > 0.0) {
            return Err(QmcError::InvalidArgument(format!("cutoff must be positive, got {r_cut}")));
        }
        let m = intervals;
        let delta = r_cut / m as f64;
        let mut knot_values: Vec<f64> = (0..=m).map(|i| u(i as f64 * delta)).collect();
        knot_values[m] = 0.0;
        let coeffs = solve_natural(&knot_values);
        Ok(Self {
            r_cut: T::from_f64(r_cut),
            inv_delta: T::from_f64(m as f64 / r_cut),
            intervals: m,
            coeffs: coeffs.into_iter().map(T::from_f64).collect(),
        })
    }

    /// Functor that is exactly zero everywhere (used to switch terms off).
    pub fn zero(r_cut: f64, intervals: usize) -> Result<Self> {
        Self::fit(|_| 0.0, r_cut, intervals)
    }

    pub fn r_cut(&self) -> T {
        self.r_cut
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn convert<U: Real>(&self) -> CubicBspline1D<U> {
        CubicBspline1D {
            r_cut: U::from_f64(self.r_cut.to_f64()),
            inv_delta: U::from_f64(self.inv_delta.to_f64()),
            intervals: self.intervals,
            coeffs: self.coeffs.iter().map(|&c| U::from_f64(c.to_f64())).collect(),
        }
    }

    /// Spline value at `r`; zero at and beyond the cutoff.
    #[inline]
    pub fn eval(&self, r: T) -> T {
        if r >= self.r_cut {
            return T::zero();
        }
        let (i, t) = self.locate(r);
        let b = basis(t);
        let c = &self.coeffs[i..i + 4];
        c[0] * b[0] + c[1] * b[1] + c[2] * b[2] + c[3] * b[3]
    }

    /// Value and analytic first/second radial derivatives at `r`.
    #[inline]
    pub fn eval_vgl(&self, r: T) -> (T, T, T) {
        if r >= self.r_cut {
            return (T::zero(), T::zero(), T::zero());
        }
        let (i, t) = self.locate(r);
        let b = basis(t);
        let d1 = basis_d1(t);
        let d2 = basis_d2(t);
        let c = &self.coeffs[i..i + 4];
        let v = c[0] * b[0] + c[1] * b[1] + c[2] * b[2] + c[3] * b[3];
        let g = (c[0] * d1[0] + c[1] * d1[1] + c[2] * d1[2] + c[3] * d1[3]) * self.inv_delta;
        let l = (c[0] * d2[0] + c[1] * d2[1] + c[2] * d2[2] + c[3] * d2[3]) * self.inv_delta * self.inv_delta;
        (v, g, l)
    }

    #[inline(always)]
    fn locate(&self, r: T) -> (usize, T) {
        let u = (r * self.inv_delta).max(T::zero());
        let mut i = u.floor().to_f64() as usize;
        if i >= self.intervals {
            i = self.intervals - 1;
        }
        (i, u - T::from_f64(i as f64))
    }
}

/// Solve the natural-boundary interpolation system for m+3 coefficients.
///
/// Boundary rows force a vanishing second derivative at both grid ends; the
/// interior rows are the (1 4 1)/6 interpolation stencil.
fn solve_natural(y: &[f64]) -> Vec<f64> {
    let m = y.len() - 1;
    let mut c = vec![0.0; m + 3];
    // Natural end at r=0: c0 - 2c1 + c2 = 0 combined with the knot-0 row
    // (c0 + 4c1 + c2)/6 = y0 pins c1 directly; same at the far end.
    c[1] = y[0];
    c[m + 1] = y[m];

    if m >= 2 {
        // Tridiagonal system for c[2..=m]: (c_i + 4 c_{i+1} + c_{i+2})/6 = y_{i}
        // for knots i = 1..m-1, with c1 and c_{m+1} moved to the RHS.
        let n = m - 1;
        let mut diag = vec![4.0 / 6.0; n];
        let mut rhs = vec![0.0; n];
        for (row, value) in rhs.iter_mut().enumerate() {
            *value = y[row + 1];
        }
        rhs[0] -= c[1] / 6.0;
        rhs[n - 1] -= c[m + 1] / 6.0;
        // Thomas elimination with constant off-diagonals 1/6.
        for row in 1..n {
            let factor = (1.0 / 6.0) / diag[row - 1];
            diag[row] -= factor / 6.0;
            rhs[row] -= factor * rhs[row - 1];
        }
        c[m] = rhs[n - 1] / diag[n - 1];
        for row in (0..n - 1).rev() {
            c[row + 2] = (rhs[row] - c[row + 3] / 6.0) / diag[row];
        }
    }

    c[0] = 2.0 * c[1] - c[2];
    c[m + 2] = 2.0 * c[m + 1] - c[m];
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rejects_tiny_grids() {
        assert!(CubicBspline1D::<f64>::fit(|_| 1.0, 2.0, 3).is_err());
        assert!(CubicBspline1D::<f64>::fit(|_| 1.0, 0.0, 8).is_err());
    }

    #[test]
    fn partition_of_unity_away_from_boundary() {
        let f = CubicBspline1D::<f64>::fit(|_| 1.0, 8.0, 32).unwrap();
        // The forced zero at the cutoff perturbs coefficients with geometric
        // decay moving inward, so values are flat except near r_cut.
        for r in [0.5, 1.0, 2.0, 4.0, 5.5] {
            assert_relative_eq!(f.eval(r), 1.0, epsilon = 1e-12);
        }
        let (_, g, l) = f.eval_vgl(1.5);
        assert!(g.abs() < 1e-12 && l.abs() < 1e-11);
    }

    #[test]
    fn interpolates_knots_exactly() {
        let r_cut = 5.0;
        let m = 32;
        let u = |r: f64| (1.0 - r / r_cut).powi(2);
        let f = CubicBspline1D::<f64>::fit(u, r_cut, m).unwrap();
        let delta = r_cut / m as f64;
        for i in 0..m {
            let r = i as f64 * delta;
            assert_relative_eq!(f.eval(r), u(r), epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_at_and_beyond_cutoff() {
        let f = CubicBspline1D::<f64>::fit(|r| 1.0 + r, 3.0, 16).unwrap();
        assert_eq!(f.eval(3.0), 0.0);
        assert_eq!(f.eval(3.0 + 1e-9), 0.0);
        assert_eq!(f.eval_vgl(1.0e30), (0.0, 0.0, 0.0));
    }

    #[test]
    fn constant_coefficients_give_flat_vgl() {
        // Fit of a constant keeps interior coefficients equal, so mid-grid
        // derivatives vanish identically.
        let f = CubicBspline1D::<f64>::fit(|_| 2.5, 10.0, 64).unwrap();
        let (v, g, l) = f.eval_vgl(4.0);
        assert_relative_eq!(v, 2.5, epsilon = 1e-12);
        assert!(g.abs() < 1e-12);
        assert!(l.abs() < 1e-12);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let u = |r: f64| (-0.7 * r).exp() * (1.0 + 0.3 * r * r);
        let f = CubicBspline1D::<f64>::fit(u, 6.0, 48).unwrap();
        let h = 1e-5;
        for r in [0.3, 1.1, 2.7, 4.9] {
            let (_, g, l) = f.eval_vgl(r);
            let fd_g = (f.eval(r + h) - f.eval(r - h)) / (2.0 * h);
            let fd_l = (f.eval(r + h) - 2.0 * f.eval(r) + f.eval(r - h)) / (h * h);
            assert_relative_eq!(g, fd_g, max_relative = 1e-6, epsilon = 1e-9);
            assert_relative_eq!(l, fd_l, max_relative = 1e-4, epsilon = 1e-5);
        }
    }

    #[test]
    fn single_precision_tracks_double() {
        let u = |r: f64| 0.5 * (-r).exp();
        let fd = CubicBspline1D::<f64>::fit(u, 4.0, 24).unwrap();
        let fs: CubicBspline1D<f32> = fd.convert();
        for i in 0..100 {
            let r = 4.0 * i as f64 / 100.0;
            let dv = fd.eval(r);
            let sv = fs.eval(r as f32) as f64;
            assert!((dv - sv).abs() <= 5e-6 * dv.abs().max(1.0));
        }
    }
}
