//! Quantum Monte Carlo kernel library and miniapp benchmark harness.
//!
//! Implements a particle-by-particle diffusion Monte Carlo pipeline twice:
//! a reference path (AoS-adjacent packed storage, store-everything, double
//! precision) and an optimized path (padded SoA storage, forward-update /
//! on-the-fly distance rows, O(N) two-body Jastrow state, mixed precision),
//! with brute-force oracles establishing equivalence between the two.
//!
//! All hot-state kernels are generic over the working scalar [`Real`]
//! (`f32` or `f64`); per-walker and ensemble quantities (log Psi, local
//! energy, branching weights) are always accumulated in `f64`.

pub mod bench;
pub mod containers;
pub mod distances;
pub mod drivers;
pub mod engine;
pub mod error;
pub mod hamiltonian;
pub mod lattice;
pub mod linalg;
pub mod oracle;
pub mod particles;
pub mod presets;
pub mod report;
pub mod rng;
pub mod splines;
pub mod stats;
pub mod timers;
pub mod vec3;
pub mod wavefunction;

pub use containers::{padded_size, AlignedSoAVector};
pub use error::{QmcError, Result};
pub use lattice::Cell;
pub use particles::{ParticleSet, Walker};

use std::fmt::{Debug, Display};

/// Working scalar for vectorizable kernel state: `f32` or `f64`.
///
/// Hot per-thread state (distance tables, spline coefficients, Jastrow
/// accumulators, the inverse Slater matrix) is stored in `T: Real`.
/// Quantities that control the Monte Carlo (log Psi, local energies,
/// weights) stay in `f64` regardless of `T`.
pub trait Real:
    num_traits::Float + num_traits::NumAssign + std::iter::Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Self-distance sentinel stored on table diagonals. Large enough that
    /// any cutoff test `r < r_cut` excludes it without a branch on `i == j`.
    const SELF_DIST: Self;

    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Real for f32 {
    const SELF_DIST: Self = 1.0e30;

    #[inline(always)]
    fn from_f64(x: f64) -> Self {
        x as f32
    }

    #[inline(always)]
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    const SELF_DIST: Self = 1.0e30;

    #[inline(always)]
    fn from_f64(x: f64) -> Self {
        x
    }

    #[inline(always)]
    fn to_f64(self) -> f64 {
        self
    }
}

/// Single-precision working scalar (mixed-precision runs).
pub type Single = f32;
/// Double-precision working scalar (reference runs).
pub type Double = f64;

