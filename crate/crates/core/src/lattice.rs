//! Orthorhombic simulation cell and minimum-image displacement.

use crate::error::{QmcError, Result};
use crate::vec3::Vec3;
use crate::Real;
use serde::Serialize;

/// Orthorhombic box with per-axis periodicity.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Cell {
    pub lengths: [f64; 3],
    pub periodic: [bool; 3],
}

impl Cell {
    pub fn periodic(lengths: [f64; 3]) -> Result<Self> {
        Self::new(lengths, [true; 3])
    }

    pub fn open(lengths: [f64; 3]) -> Result<Self> {
        Self::new(lengths, [false; 3])
    }

    pub fn new(lengths: [f64; 3], periodic: [bool; 3]) -> Result<Self> {
        if lengths.iter().any(|&l| !(l > 0.0)) {
            return Err(QmcError::InvalidArgument(format!(
                "cell lengths must be positive, got {lengths:?}"
            )));
        }
        Ok(Self { lengths, periodic })
    }

    /// Displacement `b - a` wrapped to the nearest image on periodic axes,
    /// and its length. Open axes are left unwrapped.
    #[inline]
    pub fn min_image_disp<T: Real>(&self, a: Vec3<T>, b: Vec3<T>) -> (T, Vec3<T>) {
        let mut disp = [T::zero(); 3];
        let mut r2 = T::zero();
        for d in 0..3 {
            let mut x = b[d] - a[d];
            if self.periodic[d] {
                let len = T::from_f64(self.lengths[d]);
                x = x - (x / len).round() * len;
            }
            disp[d] = x;
            r2 += x * x;
        }
        (r2.sqrt(), disp)
    }

    /// Half the shortest periodic box length, the largest radius at which
    /// the minimum-image distance is unambiguous. +inf for fully open cells.
    pub fn min_image_radius(&self) -> f64 {
        self.lengths
            .iter()
            .zip(self.periodic)
            .filter(|&(_, p)| p)
            .map(|(&l, _)| 0.5 * l)
            .fold(f64::INFINITY, f64::min)
    }
}
