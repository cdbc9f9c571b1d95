//! Spin-block Slater determinant with rank-one inverse updates.
//!
//! Convention: A(i, j) = phi_i(r_j), so electron j of the block owns column
//! j. A single-particle move replaces one column; the move ratio is the dot
//! product of the owning row of A^-1 with the candidate orbital values
//! (matrix determinant lemma), and acceptance applies the Sherman-Morrison
//! column-replacement update to A^-1 in working precision. From-scratch
//! rebuilds run a double-precision LU factorization and down-convert.

use crate::error::{QmcError, Result};
use crate::linalg::{invert, Matrix};
use crate::splines::{SpoScratch, SpoSet};
use crate::vec3::Vec3;
use crate::Real;
use std::sync::Arc;

/// Ratio magnitudes below this force a from-scratch recompute instead of a
/// rank-one update.
pub const NEAR_SINGULAR_RATIO: f64 = 1e-14;

#[derive(Debug, Clone)]
struct StagedColumn {
    col: usize,
    det_ratio: f64,
    /// A^-1 times the candidate orbital values, kept for the accept update.
    inv_times_u: Vec<f64>,
}

/// One spin block of the Slater determinant.
#[derive(Clone)]
pub struct SlaterDetBlock<T: Real> {
    spo: Arc<dyn SpoSet<T>>,
    /// Global index of the block's first electron.
    offset: usize,
    n_half: usize,
    a_inv: Matrix<T>,
    log_abs_det: f64,
    sign: f64,
    staged: Option<StagedColumn>,
}

impl<T: Real> std::fmt::Debug for SlaterDetBlock<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SlaterDetBlock")
            .field("offset", &self.offset)
            .field("n_half", &self.n_half)
            .field("log_abs_det", &self.log_abs_det)
            .field("sign", &self.sign)
            .finish()
    }
}

impl<T: Real> SlaterDetBlock<T> {
    pub fn new(spo: Arc<dyn SpoSet<T>>, offset: usize, n_half: usize) -> Self {
        assert!(spo.n_orb() >= n_half, "orbital set smaller than block");
        Self {
            spo,
            offset,
            n_half,
            a_inv: Matrix::identity(n_half),
            log_abs_det: 0.0,
            sign: 1.0,
            staged: None,
        }
    }

    pub fn n_half(&self) -> usize {
        self.n_half
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    #[inline]
    pub fn owns(&self, k: usize) -> bool {
        k >= self.offset && k < self.offset + self.n_half
    }

    pub fn spo(&self) -> &Arc<dyn SpoSet<T>> {
        &self.spo
    }

    pub fn log_abs_det(&self) -> f64 {
        self.log_abs_det
    }

    pub fn sign(&self) -> f64 {
        self.sign
    }

    pub fn a_inv(&self) -> &Matrix<T> {
        &self.a_inv
    }

    /// Rebuild A and its inverse from the block electrons' positions.
    /// The factorization runs in double precision regardless of T.
    pub fn recompute(&mut self, positions: &[Vec3<T>], values_scratch: &mut [T]) -> Result<()> {
        let n = self.n_half;
        if n == 0 {
            self.log_abs_det = 0.0;
            self.sign = 1.0;
            return Ok(());
        }
        let mut a = Matrix::<f64>::zeros(n, n);
        for j in 0..n {
            let pos = positions[self.offset + j];
            self.spo.eval_v(pos, values_scratch);
            for i in 0..n {
                a[(i, j)] = values_scratch[i].to_f64();
            }
        }
        let (inv, log_abs, sign) = invert(&a)?;
        self.a_inv = inv.convert();
        self.log_abs_det = log_abs;
        self.sign = sign;
        self.staged = None;
        Ok(())
    }

    /// Determinant-lemma ratio for replacing the column of global electron
    /// `k` with candidate orbital values; stages the update vectors.
    pub fn stage_ratio(&mut self, k: usize, cand_values: &[T]) -> f64 {
        debug_assert!(self.owns(k));
        let n = self.n_half;
        let col = k - self.offset;
        let mut inv_times_u = vec![0.0f64; n];
        for (r, w) in inv_times_u.iter_mut().enumerate() {
            let row = self.a_inv.row(r);
            let mut acc = 0.0f64;
            for i in 0..n {
                acc += row[i].to_f64() * cand_values[i].to_f64();
            }
            *w = acc;
        }
        let det_ratio = inv_times_u[col];
        self.staged = Some(StagedColumn { col, det_ratio, inv_times_u });
        det_ratio
    }

    /// Gradient of ln|det| at the candidate position, using the staged ratio:
    /// sum_i Ainv(col, i) grad phi_i(r') / det_ratio.
    pub fn staged_grad(&self, vgh: &SpoScratch<T>) -> Vec3<f64> {
        let staged = self.staged.as_ref().expect("stage_ratio first");
        let row = self.a_inv.row(staged.col);
        let mut g = [0.0f64; 3];
        for i in 0..self.n_half {
            let w = row[i].to_f64();
            g[0] += w * vgh.g[0][i].to_f64();
            g[1] += w * vgh.g[1][i].to_f64();
            g[2] += w * vgh.g[2][i].to_f64();
        }
        let inv_ratio = 1.0 / staged.det_ratio;
        [g[0] * inv_ratio, g[1] * inv_ratio, g[2] * inv_ratio]
    }

    /// Sherman-Morrison column-replacement update of A^-1.
    pub fn accept_move(&mut self, k: usize) -> Result<()> {
        debug_assert!(self.owns(k));
        let staged = self
            .staged
            .take()
            .ok_or_else(|| QmcError::Logic(format!("accept on block without staged column for {k}")))?;
        if staged.det_ratio.abs() < NEAR_SINGULAR_RATIO {
            return Err(QmcError::NearSingularUpdate { ratio: staged.det_ratio });
        }
        let n = self.n_half;
        let col = staged.col;
        let inv_ratio = 1.0 / staged.det_ratio;
        let pivot_row: Vec<T> = self.a_inv.row(col).to_vec();
        for r in 0..n {
            let w = staged.inv_times_u[r] - if r == col { 1.0 } else { 0.0 };
            let factor = T::from_f64(w * inv_ratio);
            if factor == T::zero() {
                continue;
            }
            let row = self.a_inv.row_mut(r);
            for i in 0..n {
                row[i] = row[i] - factor * pivot_row[i];
            }
        }
        self.log_abs_det += staged.det_ratio.abs().ln();
        if staged.det_ratio < 0.0 {
            self.sign = -self.sign;
        }
        Ok(())
    }

    pub fn reject_move(&mut self) {
        self.staged = None;
    }

    /// (grad, lap) of ln|det| for committed electron `k`, from the vgh of
    /// all orbitals at its current position.
    pub fn electron_derivs(&self, k: usize, vgh: &SpoScratch<T>) -> (Vec3<f64>, f64) {
        let col = k - self.offset;
        let row = self.a_inv.row(col);
        let mut g = [0.0f64; 3];
        let mut lap = 0.0f64;
        for i in 0..self.n_half {
            let w = row[i].to_f64();
            g[0] += w * vgh.g[0][i].to_f64();
            g[1] += w * vgh.g[1][i].to_f64();
            g[2] += w * vgh.g[2][i].to_f64();
            lap += w * vgh.laplacian(i).to_f64();
        }
        let g2 = g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
        (g, lap - g2)
    }

    /// max |A Ainv - I| for the given committed positions; the monitored
    /// mixed-precision drift measure.
    pub fn inverse_residual(&self, positions: &[Vec3<T>], values_scratch: &mut [T]) -> f64 {
        let n = self.n_half;
        if n == 0 {
            return 0.0;
        }
        let mut a = Matrix::<f64>::zeros(n, n);
        for j in 0..n {
            self.spo.eval_v(positions[self.offset + j], values_scratch);
            for i in 0..n {
                a[(i, j)] = values_scratch[i].to_f64();
            }
        }
        let inv: Matrix<f64> = self.a_inv.convert();
        a.identity_residual(&inv)
    }

    pub fn buffer_len(&self) -> usize {
        self.n_half * self.n_half + 2
    }

    pub fn write_buffer(&self, out: &mut [f64]) {
        let nn = self.n_half * self.n_half;
        for (slot, &value) in out[..nn].iter_mut().zip(self.a_inv.data()) {
            *slot = value.to_f64();
        }
        out[nn] = self.log_abs_det;
        out[nn + 1] = self.sign;
    }

    pub fn read_buffer(&mut self, input: &[f64]) {
        let nn = self.n_half * self.n_half;
        for (value, slot) in self.a_inv.data_mut().iter_mut().zip(&input[..nn]) {
            *value = T::from_f64(*slot);
        }
        self.log_abs_det = input[nn];
        self.sign = input[nn + 1];
        self.staged = None;
    }

    pub fn storage_scalars(&self) -> usize {
        self.n_half * self.n_half
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::splines::{PlaneWaveSPOSet, SpoScratch};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn block(n_half: usize) -> (SlaterDetBlock<f64>, Vec<Vec3<f64>>, SpoScratch<f64>) {
        let spo: Arc<dyn SpoSet<f64>> = Arc::new(PlaneWaveSPOSet::ladder([11.0, 10.0, 9.0], n_half));
        let mut rng = ChaCha8Rng::seed_from_u64(n_half as u64);
        let pos: Vec<Vec3<f64>> = (0..n_half)
            .map(|_| [rng.gen_range(0.0..11.0), rng.gen_range(0.0..10.0), rng.gen_range(0.0..9.0)])
            .collect();
        let scratch = SpoScratch::new(n_half);
        let mut b = SlaterDetBlock::new(spo, 0, n_half);
        let mut values = vec![0.0; n_half];
        b.recompute(&pos, &mut values).unwrap();
        (b, pos, scratch)
    }

    #[test]
    fn one_by_one_block_ratio_is_value_quotient() {
        let (mut b, pos, _) = block(1);
        let mut v_old = vec![0.0];
        b.spo().eval_v(pos[0], &mut v_old);
        let r_new = [1.5, 2.5, 3.5];
        let mut v_new = vec![0.0];
        b.spo().eval_v(r_new, &mut v_new);
        let rho = b.stage_ratio(0, &v_new);
        assert_relative_eq!(rho, v_new[0] / v_old[0], epsilon = 1e-12);
    }

    #[test]
    fn noop_move_ratio_one_and_inverse_unchanged() {
        let (mut b, pos, _) = block(6);
        let before: Vec<f64> = b.a_inv().data().to_vec();
        let mut v = vec![0.0; 6];
        b.spo().eval_v(pos[3], &mut v);
        let rho = b.stage_ratio(3, &v);
        assert_relative_eq!(rho, 1.0, epsilon = 1e-12);
        b.accept_move(3).unwrap();
        for (x, y) in before.iter().zip(b.a_inv().data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn column_replacement_matches_direct_inverse() {
        // 2x2 identity A; replace column 0 with (5, 7). The updated inverse
        // must match the direct inverse of [[5, 0], [7, 1]], and the ratio
        // is 5.
        let spo: Arc<dyn SpoSet<f64>> = Arc::new(PlaneWaveSPOSet::ladder([10.0; 3], 2));
        let mut b = SlaterDetBlock::new(spo, 0, 2);
        // A = I
        b.a_inv = Matrix::identity(2);
        b.log_abs_det = 0.0;
        b.sign = 1.0;
        let rho = b.stage_ratio(0, &[5.0, 7.0]);
        assert_relative_eq!(rho, 5.0, epsilon = 1e-14);
        b.accept_move(0).unwrap();
        let want = [[0.2, 0.0], [-1.4, 1.0]];
        for r in 0..2 {
            for c in 0..2 {
                assert_relative_eq!(b.a_inv()[(r, c)], want[r][c], epsilon = 1e-12);
            }
        }
        assert_relative_eq!(b.log_abs_det(), 5.0f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn residual_stays_small_over_many_updates() {
        let (mut b, mut pos, _) = block(12);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut values = vec![0.0; 12];
        let mut accepted = 0;
        while accepted < 50 {
            let k = rng.gen_range(0..12);
            let r_new = [
                pos[k][0] + rng.gen_range(-0.5..0.5),
                pos[k][1] + rng.gen_range(-0.5..0.5),
                pos[k][2] + rng.gen_range(-0.5..0.5),
            ];
            b.spo().eval_v(r_new, &mut values);
            let rho = b.stage_ratio(k, &values);
            if rho.abs() > 0.05 {
                b.accept_move(k).unwrap();
                pos[k] = r_new;
                accepted += 1;
            } else {
                b.reject_move();
            }
        }
        let mut scratch = vec![0.0; 12];
        assert!(b.inverse_residual(&pos, &mut scratch) < 1e-9);
    }

    #[test]
    fn log_det_tracks_lu_after_updates() {
        let (mut b, mut pos, _) = block(8);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut values = vec![0.0; 8];
        for _ in 0..25 {
            let k = rng.gen_range(0..8);
            let r_new = [
                pos[k][0] + rng.gen_range(-0.4..0.4),
                pos[k][1] + rng.gen_range(-0.4..0.4),
                pos[k][2] + rng.gen_range(-0.4..0.4),
            ];
            b.spo().eval_v(r_new, &mut values);
            let rho = b.stage_ratio(k, &values);
            if rho.abs() > 0.05 {
                b.accept_move(k).unwrap();
                pos[k] = r_new;
            } else {
                b.reject_move();
            }
        }
        let incremental = (b.log_abs_det(), b.sign());
        b.recompute(&pos, &mut values).unwrap();
        assert_relative_eq!(incremental.0, b.log_abs_det(), epsilon = 1e-9);
        assert_eq!(incremental.1, b.sign());
    }

    #[test]
    fn near_singular_update_is_rejected() {
        let spo: Arc<dyn SpoSet<f64>> = Arc::new(PlaneWaveSPOSet::ladder([10.0; 3], 2));
        let mut b = SlaterDetBlock::new(spo, 0, 2);
        b.a_inv = Matrix::identity(2);
        b.stage_ratio(0, &[0.0, 1.0]);
        assert!(matches!(b.accept_move(0), Err(QmcError::NearSingularUpdate { .. })));
    }

    #[test]
    fn accept_without_stage_is_logic_error() {
        let (mut b, _, _) = block(3);
        assert!(matches!(b.accept_move(1), Err(QmcError::Logic(_))));
    }

    #[test]
    fn buffer_round_trip_bitwise() {
        let (mut b, _, _) = block(5);
        let mut buf = vec![0.0; b.buffer_len()];
        b.write_buffer(&mut buf);
        let mut copy = b.clone();
        copy.a_inv = Matrix::zeros(5, 5);
        copy.read_buffer(&buf);
        let a: Vec<u64> = b.a_inv().data().iter().map(|x| x.to_bits()).collect();
        let c: Vec<u64> = copy.a_inv().data().iter().map(|x| x.to_bits()).collect();
        assert_eq!(a, c);
        assert_eq!(b.log_abs_det().to_bits(), copy.log_abs_det().to_bits());
        let _ = b.accept_move(0).is_err();
    }

    #[test]
    fn mixed_precision_residual_recovers_after_refresh() {
        let spo: Arc<dyn SpoSet<f32>> = Arc::new(PlaneWaveSPOSet::ladder([11.0, 10.0, 9.0], 10));
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        // Spread starting positions keep the orbital matrix well conditioned,
        // as electron repulsion does in a real configuration.
        let mut pos: Vec<Vec3<f32>> = (0..10)
            .map(|i| {
                [
                    (i as f32 * 1.1 + rng.gen_range(-0.2..0.2)) % 11.0,
                    (i as f32 * 2.3 + rng.gen_range(-0.2..0.2)).rem_euclid(10.0),
                    (i as f32 * 3.7 + rng.gen_range(-0.2..0.2)).rem_euclid(9.0),
                ]
            })
            .collect();
        let mut b = SlaterDetBlock::new(spo, 0, 10);
        let mut values = vec![0.0f32; 10];
        b.recompute(&pos, &mut values).unwrap();
        for _ in 0..200 {
            let k = rng.gen_range(0..10);
            let r_new = [
                pos[k][0] + rng.gen_range(-0.3..0.3f32),
                pos[k][1] + rng.gen_range(-0.3..0.3f32),
                pos[k][2] + rng.gen_range(-0.3..0.3f32),
            ];
            b.spo().eval_v(r_new, &mut values);
            let rho = b.stage_ratio(k, &values);
            if rho.abs() > 0.05 {
                b.accept_move(k).unwrap();
                pos[k] = r_new;
            } else {
                b.reject_move();
            }
        }
        let drifted = b.inverse_residual(&pos, &mut values);
        b.recompute(&pos, &mut values).unwrap();
        let refreshed = b.inverse_residual(&pos, &mut values);
        assert!(refreshed < 1e-6, "post-refresh residual {refreshed}");
        assert!(refreshed <= drifted + 1e-12);
    }
}
