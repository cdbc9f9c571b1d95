//! Periodic tricubic B-spline orbital sets.
//!
//! Coefficients are laid out `[x][y][z][orbital]` with the orbital lane
//! fastest and padded to the alignment block, so the 64-point tensor-product
//! gather reduces to unit-stride loops over orbitals. The value-only kernel
//! and the value+gradient+hessian kernel share the index/weight setup.

use crate::containers::{padded_size, DEFAULT_BLOCK};
use crate::error::{QmcError, Result};
use crate::splines::{SpoScratch, SpoSet};
use crate::vec3::Vec3;
use crate::Real;
use std::io::{Read, Write};

type Generator<'a> = &'a (dyn Fn(Vec3<f64>) -> f64 + Sync);

/// Shared read-only orbital table over a periodic cell.
#[derive(Debug, Clone)]
pub struct TricubicSPOSet<T: Real> {
    grid: [usize; 3],
    lengths: [f64; 3],
    n_orb: usize,
    n_lanes: usize,
    coeffs: Vec<T>,
}

impl TricubicSPOSet<f64> {
    /// Interpolating fit: the spline reproduces every generator exactly at
    /// all grid points (cyclic tridiagonal solve along each axis).
    pub fn fit(lengths: [f64; 3], grid: [usize; 3], generators: &[Generator<'_>]) -> Result<Self> {
        if grid.iter().any(|&g| g < 4) {
            return Err(QmcError::InvalidArgument(format!("grid dims must be >= 4, got {grid:?}")));
        }
        if lengths.iter().any(|&l| !(l > 0.0)) {
            return Err(QmcError::InvalidArgument(format!("cell lengths must be positive, got {lengths:?}")));
        }
        let [nx, ny, nz] = grid;
        let n_orb = generators.len();
        let n_lanes = padded_size(n_orb, DEFAULT_BLOCK)?;
        let mut coeffs = vec![0.0f64; nx * ny * nz * n_lanes];
        let mut work = vec![0.0f64; nx * ny * nz];
        let mut line = vec![0.0f64; nx.max(ny).max(nz)];
        let mut scratch = CyclicScratch::with_capacity(nx.max(ny).max(nz));

        for (orb, gen) in generators.iter().enumerate() {
            for ix in 0..nx {
                for iy in 0..ny {
                    for iz in 0..nz {
                        let pos = [
                            ix as f64 * lengths[0] / nx as f64,
                            iy as f64 * lengths[1] / ny as f64,
                            iz as f64 * lengths[2] / nz as f64,
                        ];
                        work[(ix * ny + iy) * nz + iz] = gen(pos);
                    }
                }
            }
            // One interpolation solve per grid line, one pass per axis.
            for iy in 0..ny {
                for iz in 0..nz {
                    for ix in 0..nx {
                        line[ix] = work[(ix * ny + iy) * nz + iz];
                    }
                    scratch.solve(&mut line[..nx]);
                    for ix in 0..nx {
                        work[(ix * ny + iy) * nz + iz] = line[ix];
                    }
                }
            }
            for ix in 0..nx {
                for iz in 0..nz {
                    for iy in 0..ny {
                        line[iy] = work[(ix * ny + iy) * nz + iz];
                    }
                    scratch.solve(&mut line[..ny]);
                    for iy in 0..ny {
                        work[(ix * ny + iy) * nz + iz] = line[iy];
                    }
                }
            }
            for ix in 0..nx {
                for iy in 0..ny {
                    let base = (ix * ny + iy) * nz;
                    scratch.solve(&mut work[base..base + nz]);
                }
            }
            for (cell_idx, &c) in work.iter().enumerate() {
                coeffs[cell_idx * n_lanes + orb] = c;
            }
        }
        Ok(Self { grid, lengths, n_orb, n_lanes, coeffs })
    }
}

impl<T: Real> TricubicSPOSet<T> {
    pub fn grid(&self) -> [usize; 3] {
        self.grid
    }

    pub fn lengths(&self) -> [f64; 3] {
        self.lengths
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn lane_stride(&self) -> usize {
        self.n_lanes
    }

    pub fn convert<U: Real>(&self) -> TricubicSPOSet<U> {
        TricubicSPOSet {
            grid: self.grid,
            lengths: self.lengths,
            n_orb: self.n_orb,
            n_lanes: self.n_lanes,
            coeffs: self.coeffs.iter().map(|&c| U::from_f64(c.to_f64())).collect(),
        }
    }

    pub fn storage_bytes(&self) -> usize {
        self.coeffs.len() * std::mem::size_of::<T>()
    }

    /// Wrapped fractional-coordinate setup shared by both kernels.
    #[inline]
    fn locate(&self, pos: Vec3<T>) -> ([[usize; 4]; 3], [T; 3]) {
        let mut idx = [[0usize; 4]; 3];
        let mut frac = [T::zero(); 3];
        for d in 0..3 {
            let n = self.grid[d];
            let nf = T::from_f64(n as f64);
            let mut u = pos[d] / T::from_f64(self.lengths[d]) * nf;
            u = u - (u / nf).floor() * nf;
            let mut i = u.floor().to_f64() as usize;
            if i >= n {
                i = n - 1;
            }
            frac[d] = u - T::from_f64(i as f64);
            idx[d] = [(i + n - 1) % n, i, (i + 1) % n, (i + 2) % n];
        }
        (idx, frac)
    }

    fn eval_values(&self, pos: Vec3<T>, out: &mut [T]) {
        assert!(out.len() >= self.n_lanes);
        let (idx, frac) = self.locate(pos);
        let wx = super::bspline1d_basis(frac[0]);
        let wy = super::bspline1d_basis(frac[1]);
        let wz = super::bspline1d_basis(frac[2]);
        let [_, ny, nz] = [self.grid[0], self.grid[1], self.grid[2]];
        out[..self.n_lanes].fill(T::zero());
        for a in 0..4 {
            for b in 0..4 {
                let wxy = wx[a] * wy[b];
                let plane = (idx[0][a] * ny + idx[1][b]) * nz;
                for c in 0..4 {
                    let w = wxy * wz[c];
                    let base = (plane + idx[2][c]) * self.n_lanes;
                    let row = &self.coeffs[base..base + self.n_lanes];
                    for (acc, &coef) in out[..self.n_lanes].iter_mut().zip(row) {
                        *acc += w * coef;
                    }
                }
            }
        }
    }

    fn eval_all(&self, pos: Vec3<T>, out: &mut SpoScratch<T>) {
        let (idx, frac) = self.locate(pos);
        let wx = super::bspline1d_basis(frac[0]);
        let wy = super::bspline1d_basis(frac[1]);
        let wz = super::bspline1d_basis(frac[2]);
        let dx = super::bspline1d_basis_d1(frac[0]);
        let dy = super::bspline1d_basis_d1(frac[1]);
        let dz = super::bspline1d_basis_d1(frac[2]);
        let d2x = super::bspline1d_basis_d2(frac[0]);
        let d2y = super::bspline1d_basis_d2(frac[1]);
        let d2z = super::bspline1d_basis_d2(frac[2]);
        let sx = T::from_f64(self.grid[0] as f64 / self.lengths[0]);
        let sy = T::from_f64(self.grid[1] as f64 / self.lengths[1]);
        let sz = T::from_f64(self.grid[2] as f64 / self.lengths[2]);
        let [_, ny, nz] = [self.grid[0], self.grid[1], self.grid[2]];
        let n = self.n_lanes;
        out.clear(n);

        for a in 0..4 {
            for b in 0..4 {
                let plane = (idx[0][a] * ny + idx[1][b]) * nz;
                for c in 0..4 {
                    let base = (plane + idx[2][c]) * n;
                    let row = &self.coeffs[base..base + n];
                    let w_v = wx[a] * wy[b] * wz[c];
                    let w_gx = dx[a] * wy[b] * wz[c] * sx;
                    let w_gy = wx[a] * dy[b] * wz[c] * sy;
                    let w_gz = wx[a] * wy[b] * dz[c] * sz;
                    let w_xx = d2x[a] * wy[b] * wz[c] * sx * sx;
                    let w_xy = dx[a] * dy[b] * wz[c] * sx * sy;
                    let w_xz = dx[a] * wy[b] * dz[c] * sx * sz;
                    let w_yy = wx[a] * d2y[b] * wz[c] * sy * sy;
                    let w_yz = wx[a] * dy[b] * dz[c] * sy * sz;
                    let w_zz = wx[a] * wy[b] * d2z[c] * sz * sz;
                    for o in 0..n {
                        let coef = row[o];
                        out.v[o] += w_v * coef;
                        out.g[0][o] += w_gx * coef;
                        out.g[1][o] += w_gy * coef;
                        out.g[2][o] += w_gz * coef;
                        out.h[0][o] += w_xx * coef;
                        out.h[1][o] += w_xy * coef;
                        out.h[2][o] += w_xz * coef;
                        out.h[3][o] += w_yy * coef;
                        out.h[4][o] += w_yz * coef;
                        out.h[5][o] += w_zz * coef;
                    }
                }
            }
        }
    }

    /// Coefficient dump: little-endian header {dims, n_orb, precision} plus
    /// the raw lane-fastest coefficient stream.
    pub fn save<W: Write>(&self, out: &mut W) -> Result<()> {
        out.write_all(MAGIC)?;
        for d in self.grid {
            out.write_all(&(d as u32).to_le_bytes())?;
        }
        out.write_all(&(self.n_orb as u32).to_le_bytes())?;
        out.write_all(&(self.n_lanes as u32).to_le_bytes())?;
        out.write_all(&[std::mem::size_of::<T>() as u8])?;
        for l in self.lengths {
            out.write_all(&l.to_le_bytes())?;
        }
        for &c in &self.coeffs {
            let bytes = c.to_f64().to_le_bytes();
            // f32 tables store 4 bytes per scalar, exact for values that
            // were single precision to begin with.
            if std::mem::size_of::<T>() == 4 {
                out.write_all(&(c.to_f64() as f32).to_le_bytes())?;
            } else {
                out.write_all(&bytes)?;
            }
        }
        Ok(())
    }

    pub fn load<R: Read>(input: &mut R) -> Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(QmcError::Format("bad orbital table magic".into()));
        }
        let mut grid = [0usize; 3];
        for g in &mut grid {
            *g = read_u32(input)? as usize;
        }
        let n_orb = read_u32(input)? as usize;
        let n_lanes = read_u32(input)? as usize;
        let mut prec = [0u8; 1];
        input.read_exact(&mut prec)?;
        if prec[0] as usize != std::mem::size_of::<T>() {
            return Err(QmcError::Format(format!(
                "table precision is {} bytes, expected {}",
                prec[0],
                std::mem::size_of::<T>()
            )));
        }
        let mut lengths = [0.0f64; 3];
        for l in &mut lengths {
            let mut b = [0u8; 8];
            input.read_exact(&mut b)?;
            *l = f64::from_le_bytes(b);
        }
        let count = grid[0] * grid[1] * grid[2] * n_lanes;
        let mut coeffs = Vec::with_capacity(count);
        if prec[0] == 4 {
            let mut b = [0u8; 4];
            for _ in 0..count {
                input.read_exact(&mut b)?;
                coeffs.push(T::from_f64(f32::from_le_bytes(b) as f64));
            }
        } else {
            let mut b = [0u8; 8];
            for _ in 0..count {
                input.read_exact(&mut b)?;
                coeffs.push(T::from_f64(f64::from_le_bytes(b)));
            }
        }
        Ok(Self { grid, lengths, n_orb, n_lanes, coeffs })
    }
}

const MAGIC: &[u8; 8] = b"QMCKSPO1";

fn read_u32<R: Read>(input: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

impl<T: Real> SpoSet<T> for TricubicSPOSet<T> {
    fn n_orb(&self) -> usize {
        self.n_orb
    }

    fn n_lanes(&self) -> usize {
        self.n_lanes
    }

    fn eval_v(&self, pos: Vec3<T>, values: &mut [T]) {
        self.eval_values(pos, values);
    }

    fn eval_vgh(&self, pos: Vec3<T>, out: &mut SpoScratch<T>) {
        self.eval_all(pos, out);
    }
}

/// Cyclic (1 4 1)/6 interpolation solve along one periodic grid line,
/// reduced to two Thomas solves by a rank-one correction.
struct CyclicScratch {
    diag: Vec<f64>,
    z: Vec<f64>,
}

impl CyclicScratch {
    fn with_capacity(n: usize) -> Self {
        Self { diag: vec![0.0; n], z: vec![0.0; n] }
    }

    fn solve(&mut self, f: &mut [f64]) {
        let n = f.len();
        debug_assert!(n >= 4);
        const OFF: f64 = 1.0 / 6.0;
        const DIAG: f64 = 4.0 / 6.0;
        let gamma = -DIAG;

        let diag = &mut self.diag[..n];
        diag.fill(DIAG);
        diag[0] = DIAG - gamma;
        diag[n - 1] = DIAG - OFF * OFF / gamma;

        let z = &mut self.z[..n];
        z.fill(0.0);
        z[0] = gamma;
        z[n - 1] = OFF;

        thomas(diag, f);
        // diag was destroyed by elimination; rebuild for the second solve.
        let diag = &mut self.diag[..n];
        diag.fill(DIAG);
        diag[0] = DIAG - gamma;
        diag[n - 1] = DIAG - OFF * OFF / gamma;
        thomas(diag, z);

        let vy = f[0] + (OFF / gamma) * f[n - 1];
        let vz = z[0] + (OFF / gamma) * z[n - 1];
        let fact = vy / (1.0 + vz);
        for j in 0..n {
            f[j] -= fact * z[j];
        }
    }
}

/// In-place Thomas elimination with constant off-diagonals 1/6; `diag` is
/// consumed.
fn thomas(diag: &mut [f64], rhs: &mut [f64]) {
    const OFF: f64 = 1.0 / 6.0;
    let n = diag.len();
    for i in 1..n {
        let w = OFF / diag[i - 1];
        diag[i] -= w * OFF;
        rhs[i] -= w * rhs[i - 1];
    }
    rhs[n - 1] /= diag[n - 1];
    for i in (0..n - 1).rev() {
        rhs[i] = (rhs[i] - OFF * rhs[i + 1]) / diag[i];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn fit_one(lengths: [f64; 3], grid: [usize; 3], f: impl Fn(Vec3<f64>) -> f64 + Sync) -> TricubicSPOSet<f64> {
        let gens: Vec<&(dyn Fn(Vec3<f64>) -> f64 + Sync)> = vec![&f];
        TricubicSPOSet::fit(lengths, grid, &gens).unwrap()
    }

    #[test]
    fn cyclic_solve_reproduces_data() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for n in [4usize, 5, 12, 80] {
            let data: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut c = data.clone();
            CyclicScratch::with_capacity(n).solve(&mut c);
            for j in 0..n {
                let interp = (c[(j + n - 1) % n] + 4.0 * c[j] + c[(j + 1) % n]) / 6.0;
                assert_relative_eq!(interp, data[j], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn constant_field() {
        let s = fit_one([5.0, 5.0, 5.0], [6, 6, 6], |_| 3.5);
        let mut scratch = SpoScratch::new(s.n_lanes());
        s.eval_vgh([1.3, 0.2, 4.9], &mut scratch);
        assert_relative_eq!(scratch.v[0], 3.5, epsilon = 1e-12);
        for d in 0..3 {
            assert!(scratch.g[d][0].abs() < 1e-12);
        }
        for h in 0..6 {
            assert!(scratch.h[h][0].abs() < 1e-12);
        }
    }

    #[test]
    fn grid_point_exactness() {
        let lengths = [4.0, 6.0, 5.0];
        let grid = [8, 10, 6];
        let f = |p: Vec3<f64>| {
            (2.0 * PI * p[0] / lengths[0]).cos() * (2.0 * PI * p[1] / lengths[1]).sin() + 0.3 * (2.0 * PI * p[2] / lengths[2]).cos()
        };
        let s = fit_one(lengths, grid, f);
        let mut v = vec![0.0f64; s.n_lanes()];
        for ix in 0..grid[0] {
            for iy in 0..grid[1] {
                for iz in 0..grid[2] {
                    let p = [
                        ix as f64 * lengths[0] / grid[0] as f64,
                        iy as f64 * lengths[1] / grid[1] as f64,
                        iz as f64 * lengths[2] / grid[2] as f64,
                    ];
                    s.eval_v(p, &mut v);
                    assert_relative_eq!(v[0], f(p), epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn cosine_matches_analytic_on_fine_grid() {
        let lengths = [10.0, 10.0, 10.0];
        let k = 2.0 * PI / lengths[0];
        let s = fit_one(lengths, [80, 4, 4], move |p| (k * p[0]).cos());
        let mut scratch = SpoScratch::new(s.n_lanes());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let p = [rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0)];
            s.eval_vgh(p, &mut scratch);
            let exact = (k * p[0]).cos();
            assert!((scratch.v[0] - exact).abs() < 1e-6, "value at {p:?}");
            if exact.abs() > 0.2 {
                // Second-derivative accuracy of the interpolant is
                // O((kh)^2 / 12), about 5e-4 at 80 points per period.
                let lap = scratch.h[0][0] + scratch.h[3][0] + scratch.h[5][0];
                assert_relative_eq!(lap / scratch.v[0], -k * k, max_relative = 1e-3);
            }
        }
    }

    #[test]
    fn laplacian_error_shrinks_with_resolution() {
        let lengths = [10.0, 10.0, 10.0];
        let k = 2.0 * PI / lengths[0];
        let s = fit_one(lengths, [192, 4, 4], move |p| (k * p[0]).cos());
        let mut scratch = SpoScratch::new(s.n_lanes());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        for _ in 0..300 {
            let p = [rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0)];
            s.eval_vgh(p, &mut scratch);
            if (k * p[0]).cos().abs() > 0.2 {
                let lap = scratch.h[0][0] + scratch.h[3][0] + scratch.h[5][0];
                assert_relative_eq!(lap / scratch.v[0], -k * k, max_relative = 1e-4);
            }
        }
    }

    #[test]
    fn gradient_matches_finite_difference_of_value_kernel() {
        let lengths = [7.0, 9.0, 8.0];
        let f = |p: Vec3<f64>| {
            (2.0 * PI * p[0] / 7.0).cos() + (2.0 * PI * p[1] / 9.0).sin() * (2.0 * PI * p[2] / 8.0).cos()
        };
        let s = fit_one(lengths, [24, 24, 24], f);
        let mut scratch = SpoScratch::new(s.n_lanes());
        let mut v1 = vec![0.0f64; s.n_lanes()];
        let mut v2 = vec![0.0f64; s.n_lanes()];
        let p = [1.23, 4.56, 2.78];
        s.eval_vgh(p, &mut scratch);
        for d in 0..3 {
            let h = 1e-5 * lengths[d];
            let mut pp = p;
            let mut pm = p;
            pp[d] += h;
            pm[d] -= h;
            s.eval_v(pp, &mut v1);
            s.eval_v(pm, &mut v2);
            let fd = (v1[0] - v2[0]) / (2.0 * h);
            assert_relative_eq!(scratch.g[d][0], fd, max_relative = 1e-6, epsilon = 1e-9);
        }
        // value lanes agree between the two kernels
        s.eval_v(p, &mut v1);
        assert_relative_eq!(scratch.v[0], v1[0], epsilon = 1e-12);
    }

    #[test]
    fn periodic_continuity() {
        let lengths = [6.0, 6.0, 6.0];
        let s = fit_one(lengths, [12, 12, 12], |p| (2.0 * PI * p[0] / 6.0).sin() + 0.2 * (4.0 * PI * p[1] / 6.0).cos());
        let mut a = vec![0.0f64; s.n_lanes()];
        let mut b = vec![0.0f64; s.n_lanes()];
        let p = [0.37, 5.91, 3.3];
        s.eval_v(p, &mut a);
        s.eval_v([p[0] + 6.0, p[1] - 6.0, p[2] + 12.0], &mut b);
        assert_relative_eq!(a[0], b[0], epsilon = 1e-12);
    }

    #[test]
    fn save_load_round_trip() {
        let s = fit_one([5.0, 5.0, 5.0], [6, 6, 6], |p| p[0].sin() + p[1] * 0.1 + (p[2] * 0.7).cos());
        let mut bytes = Vec::new();
        s.save(&mut bytes).unwrap();
        let loaded = TricubicSPOSet::<f64>::load(&mut bytes.as_slice()).unwrap();
        assert_eq!(loaded.grid(), s.grid());
        assert_eq!(loaded.n_orb(), s.n_orb());
        assert_eq!(loaded.coeffs(), s.coeffs());
        // Wrong precision is rejected.
        assert!(TricubicSPOSet::<f32>::load(&mut bytes.as_slice()).is_err());
        let s32: TricubicSPOSet<f32> = s.convert();
        let mut bytes32 = Vec::new();
        s32.save(&mut bytes32).unwrap();
        let loaded32 = TricubicSPOSet::<f32>::load(&mut bytes32.as_slice()).unwrap();
        assert_eq!(loaded32.coeffs(), s32.coeffs());
    }

    #[test]
    fn single_precision_values_track_double() {
        let lengths = [8.0, 8.0, 8.0];
        let s = fit_one(lengths, [16, 16, 16], |p| {
            (2.0 * PI * p[0] / 8.0).cos() * 0.9 + (2.0 * PI * (p[1] + p[2]) / 8.0).sin() * 0.4
        });
        let s32: TricubicSPOSet<f32> = s.convert();
        let mut vd = vec![0.0f64; s.n_lanes()];
        let mut vs = vec![0.0f32; s.n_lanes()];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let p = [rng.gen_range(0.0..8.0), rng.gen_range(0.0..8.0), rng.gen_range(0.0..8.0)];
            s.eval_v(p, &mut vd);
            s32.eval_v([p[0] as f32, p[1] as f32, p[2] as f32], &mut vs);
            assert!((vd[0] - vs[0] as f64).abs() < 5e-6 * vd[0].abs().max(1.0));
        }
    }
}
