//! Brute-force reference implementations for tests and acceptance checks.
//!
//! Everything here is deliberately simple, double precision, and independent
//! of the incremental kernel path: full double loops for the Jastrow sums, a
//! plain Gaussian-elimination determinant, and a naive 64-term tricubic sum.
//! No caching, no incremental state.

use crate::error::{QmcError, Result};
use crate::lattice::Cell;
use crate::splines::{CubicBspline1D, PlaneWaveSPOSet, SpoSet, TricubicSPOSet};
use crate::vec3::{self, Vec3};
use crate::wavefunction::SpinChannels;

/// Finite-difference step and per-precision tolerance profile.
#[derive(Debug, Clone, Copy)]
pub struct OracleConfig {
    pub fd_step: f64,
    pub ratio_tol_double: f64,
    pub ratio_tol_mixed: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { fd_step: 1e-5, ratio_tol_double: 1e-9, ratio_tol_mixed: 5e-4 }
    }
}

/// Orbital source for the oracle, evaluated by its own code path.
#[derive(Debug, Clone)]
pub enum OracleSpo {
    PlaneWave(PlaneWaveSPOSet),
    Tricubic(TricubicSPOSet<f64>),
}

impl OracleSpo {
    pub fn values(&self, pos: Vec3<f64>, out: &mut [f64]) {
        match self {
            OracleSpo::PlaneWave(s) => s.eval_v(pos, out),
            OracleSpo::Tricubic(s) => naive_tricubic_values(s, pos, out),
        }
    }

    pub fn n_orb(&self) -> usize {
        match self {
            OracleSpo::PlaneWave(s) => <PlaneWaveSPOSet as SpoSet<f64>>::n_orb(s),
            OracleSpo::Tricubic(s) => s.n_orb(),
        }
    }
}

/// Direct 64-term tensor-product sum over the coefficient table, with its
/// own basis polynomial evaluation.
pub fn naive_tricubic_values(set: &TricubicSPOSet<f64>, pos: Vec3<f64>, out: &mut [f64]) {
    let grid = set.grid();
    let lengths = set.lengths();
    let stride = set.lane_stride();
    let coeffs = set.coeffs();
    let n_orb = set.n_orb();

    let mut idx = [[0usize; 4]; 3];
    let mut w = [[0.0f64; 4]; 3];
    for d in 0..3 {
        let n = grid[d];
        let u = (pos[d] / lengths[d] * n as f64).rem_euclid(n as f64);
        let cell = (u.floor() as usize).min(n - 1);
        let t = u - cell as f64;
        idx[d] = [(cell + n - 1) % n, cell, (cell + 1) % n, (cell + 2) % n];
        let omt = 1.0 - t;
        w[d] = [
            omt * omt * omt / 6.0,
            (3.0 * t * t * t - 6.0 * t * t + 4.0) / 6.0,
            (-3.0 * t * t * t + 3.0 * t * t + 3.0 * t + 1.0) / 6.0,
            t * t * t / 6.0,
        ];
    }
    out[..n_orb].fill(0.0);
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                let weight = w[0][a] * w[1][b] * w[2][c];
                let base = ((idx[0][a] * grid[1] + idx[1][b]) * grid[2] + idx[2][c]) * stride;
                for (o, acc) in out[..n_orb].iter_mut().enumerate() {
                    *acc += weight * coeffs[base + o];
                }
            }
        }
    }
}

/// Double-precision description of the trial wavefunction, independent of
/// the engine's working-precision state.
#[derive(Debug, Clone)]
pub struct OracleWavefunction {
    pub cell: Cell,
    pub n_up: usize,
    pub n_dn: usize,
    pub ion_pos: Vec<Vec3<f64>>,
    pub ion_species: Vec<usize>,
    /// Per-species one-body functors; empty disables the term.
    pub j1: Vec<CubicBspline1D<f64>>,
    pub j2: Option<SpinChannels<f64>>,
    pub spo: OracleSpo,
}

impl OracleWavefunction {
    pub fn n(&self) -> usize {
        self.n_up + self.n_dn
    }

    /// (log |Psi|, sign) evaluated from scratch.
    pub fn brute_logpsi(&self, pos: &[Vec3<f64>]) -> Result<(f64, f64)> {
        assert_eq!(pos.len(), self.n());
        let mut log = 0.0;

        if !self.j1.is_empty() {
            for (ion, &rp) in self.ion_pos.iter().enumerate() {
                let functor = &self.j1[self.ion_species[ion]];
                for &re in pos {
                    let (d, _) = self.cell.min_image_disp(rp, re);
                    log += functor.eval(d);
                }
            }
        }

        if let Some(channels) = &self.j2 {
            for i in 0..pos.len() {
                for j in 0..pos.len() {
                    if i == j {
                        continue;
                    }
                    let (d, _) = self.cell.min_image_disp(pos[i], pos[j]);
                    let same = (i < self.n_up) == (j < self.n_up);
                    log += channels.channel(same).eval(d);
                }
            }
        }

        let mut sign = 1.0;
        for (offset, n_half) in [(0, self.n_up), (self.n_up, self.n_dn)] {
            if n_half == 0 {
                continue;
            }
            let (l, s) = self.block_logdet(pos, offset, n_half)?;
            log += l;
            sign *= s;
        }
        Ok((log, sign))
    }

    fn block_logdet(&self, pos: &[Vec3<f64>], offset: usize, n_half: usize) -> Result<(f64, f64)> {
        let mut values = vec![0.0; self.spo.n_orb().max(n_half)];
        let mut a = vec![0.0f64; n_half * n_half];
        for j in 0..n_half {
            self.spo.values(pos[offset + j], &mut values);
            for i in 0..n_half {
                a[i * n_half + j] = values[i];
            }
        }
        gauss_logdet(a, n_half)
    }

    /// Psi(R') / Psi(R) for moving electron k, by two from-scratch
    /// evaluations.
    pub fn brute_ratio(&self, pos: &[Vec3<f64>], k: usize, r_new: Vec3<f64>) -> Result<f64> {
        let (log_old, sign_old) = self.brute_logpsi(pos)?;
        let mut moved = pos.to_vec();
        moved[k] = r_new;
        let (log_new, sign_new) = self.brute_logpsi(&moved)?;
        Ok((log_new - log_old).exp() * sign_new * sign_old)
    }

    /// Central-difference gradient of ln |Psi| with respect to electron k.
    pub fn fd_grad_logpsi(&self, pos: &[Vec3<f64>], k: usize, h: f64) -> Result<Vec3<f64>> {
        let mut out = [0.0; 3];
        let mut work = pos.to_vec();
        for d in 0..3 {
            work[k][d] = pos[k][d] + h;
            let (lp, _) = self.brute_logpsi(&work)?;
            work[k][d] = pos[k][d] - h;
            let (lm, _) = self.brute_logpsi(&work)?;
            work[k][d] = pos[k][d];
            out[d] = (lp - lm) / (2.0 * h);
        }
        Ok(out)
    }

    /// Central-difference laplacian of ln |Psi| with respect to electron k.
    pub fn fd_lap_logpsi(&self, pos: &[Vec3<f64>], k: usize, h: f64) -> Result<f64> {
        let (l0, _) = self.brute_logpsi(pos)?;
        let mut acc = 0.0;
        let mut work = pos.to_vec();
        for d in 0..3 {
            work[k][d] = pos[k][d] + h;
            let (lp, _) = self.brute_logpsi(&work)?;
            work[k][d] = pos[k][d] - h;
            let (lm, _) = self.brute_logpsi(&work)?;
            work[k][d] = pos[k][d];
            acc += (lp - 2.0 * l0 + lm) / (h * h);
        }
        Ok(acc)
    }

    /// Kinetic energy -1/2 sum_k (lap_k + |grad_k|^2) from finite
    /// differences of the from-scratch log value.
    pub fn fd_kinetic(&self, pos: &[Vec3<f64>], h: f64) -> Result<f64> {
        let mut acc = 0.0;
        for k in 0..pos.len() {
            let g = self.fd_grad_logpsi(pos, k, h)?;
            let l = self.fd_lap_logpsi(pos, k, h)?;
            acc += l + vec3::norm2(g);
        }
        Ok(-0.5 * acc)
    }
}

/// Plain Gaussian elimination with partial pivoting; returns
/// (log |det|, sign).
fn gauss_logdet(mut a: Vec<f64>, n: usize) -> Result<(f64, f64)> {
    let mut log = 0.0;
    let mut sign = 1.0;
    for col in 0..n {
        let mut pivot = col;
        for r in col + 1..n {
            if a[r * n + col].abs() > a[pivot * n + col].abs() {
                pivot = r;
            }
        }
        let pv = a[pivot * n + col];
        if pv == 0.0 || !pv.is_finite() {
            return Err(QmcError::SingularMatrix);
        }
        if pivot != col {
            sign = -sign;
            for c in 0..n {
                a.swap(col * n + c, pivot * n + c);
            }
        }
        log += pv.abs().ln();
        if pv < 0.0 {
            sign = -sign;
        }
        for r in col + 1..n {
            let f = a[r * n + col] / pv;
            if f != 0.0 {
                for c in col..n {
                    a[r * n + c] -= f * a[col * n + c];
                }
            }
        }
    }
    Ok((log, sign))
}
