//! Local-energy pieces: kinetic assembly, minimum-image pairwise Coulomb
//! sums, and the model nonlocal pseudopotential data (radial channels plus
//! the spherical quadrature rule). The quadrature loop itself runs in the
//! engine, which owns the virtual-move machinery it needs.

use crate::distances::{ABTable, ElecElecTable};
use crate::error::{QmcError, Result};
use crate::particles::ParticleSet;
use crate::splines::CubicBspline1D;
use crate::vec3::Vec3;
use crate::Real;
use rand::Rng;
use serde::Serialize;

/// Pair distances below this are treated as a divergence.
pub const COULOMB_GUARD: f64 = 1e-10;

/// Kinetic energy -1/2 sum_k (L_k + |G_k|^2) from the wavefunction
/// derivatives of ln Psi.
pub fn kinetic(grad: &[Vec3<f64>], lap: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (g, &l) in grad.iter().zip(lap) {
        acc += l + g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
    }
    -0.5 * acc
}

/// Electron-electron Coulomb sum over unique pairs (unit charges).
pub fn coulomb_ee<T: Real>(table: &ElecElecTable<T>, n: usize) -> Result<f64> {
    let mut acc = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let d = table.dist(i, j)?.to_f64();
            if d < COULOMB_GUARD {
                return Err(QmcError::CoulombDivergence { dist: d });
            }
            acc += 1.0 / d;
        }
    }
    Ok(acc)
}

/// Electron-ion Coulomb sum with charges -Z* per ion species.
pub fn coulomb_ei<T: Real>(
    table: &ABTable<T>,
    electrons: &ParticleSet<T>,
    ions: &ParticleSet<T>,
) -> Result<f64> {
    let mut acc = 0.0;
    for i in 0..electrons.len() {
        let row = table.row(i)?;
        for (ion, &d) in row.dists[..ions.len()].iter().enumerate() {
            let d = d.to_f64();
            if d < COULOMB_GUARD {
                return Err(QmcError::CoulombDivergence { dist: d });
            }
            acc -= ions.charge_of(ion) / d;
        }
    }
    Ok(acc)
}

/// Radial channels of one ion species: v_l for l = 0, 1, sharing a cutoff.
#[derive(Debug, Clone)]
pub struct PpChannels<T: Real> {
    pub r_cut: f64,
    pub v_l: Vec<CubicBspline1D<T>>,
}

impl<T: Real> PpChannels<T> {
    pub fn convert<U: Real>(&self) -> PpChannels<U> {
        PpChannels { r_cut: self.r_cut, v_l: self.v_l.iter().map(|f| f.convert()).collect() }
    }
}

/// Model nonlocal pseudopotential: per-species radial channels evaluated by
/// a 12-point spherical quadrature of wavefunction ratios.
#[derive(Debug, Clone)]
pub struct NonlocalPP<T: Real> {
    pub per_species: Vec<PpChannels<T>>,
}

impl<T: Real> NonlocalPP<T> {
    pub fn convert<U: Real>(&self) -> NonlocalPP<U> {
        NonlocalPP { per_species: self.per_species.iter().map(|c| c.convert()).collect() }
    }

    pub fn max_cutoff(&self) -> f64 {
        self.per_species.iter().map(|c| c.r_cut).fold(0.0, f64::max)
    }
}

/// Unit icosahedron vertices: a 12-point rule with equal weights 1/12.
/// Antipodal symmetry makes the P_1 moment vanish exactly.
pub fn icosahedral_rule() -> [[f64; 3]; 12] {
    let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
    let norm = (1.0 + phi * phi).sqrt();
    let a = 1.0 / norm;
    let b = phi / norm;
    [
        [0.0, a, b],
        [0.0, -a, b],
        [0.0, a, -b],
        [0.0, -a, -b],
        [a, b, 0.0],
        [-a, b, 0.0],
        [a, -b, 0.0],
        [-a, -b, 0.0],
        [b, 0.0, a],
        [-b, 0.0, a],
        [b, 0.0, -a],
        [-b, 0.0, -a],
    ]
}

/// Uniformly random rotation matrix (quaternion method), one per
/// (electron, ion, step) so the quadrature grid carries no fixed bias.
pub fn random_rotation<R: Rng>(rng: &mut R) -> [[f64; 3]; 3] {
    let mut q = [0.0f64; 4];
    loop {
        let mut norm2 = 0.0;
        for x in &mut q {
            *x = rng.sample::<f64, _>(rand_distr::StandardNormal);
            norm2 += *x * *x;
        }
        if norm2 > 1e-12 {
            let inv = 1.0 / norm2.sqrt();
            for x in &mut q {
                *x *= inv;
            }
            break;
        }
    }
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

#[inline]
pub fn rotate(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

/// Local-energy breakdown in Hartree-like units.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct LocalEnergyBreakdown {
    pub kinetic: f64,
    pub coulomb_ee: f64,
    pub coulomb_ei: f64,
    pub nonlocal: f64,
    pub total: f64,
}

impl LocalEnergyBreakdown {
    pub fn assemble(kinetic: f64, coulomb_ee: f64, coulomb_ei: f64, nonlocal: f64) -> Self {
        Self {
            kinetic,
            coulomb_ee,
            coulomb_ei,
            nonlocal,
            total: kinetic + coulomb_ee + coulomb_ei + nonlocal,
        }
    }
}
