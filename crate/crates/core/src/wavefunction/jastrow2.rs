//! Two-body (electron-electron) Jastrow component, in both storage schemes.
//!
//! The log value is the ordered-pair sum over distinct electrons i != j of
//! U2(|r_i - r_j|), with separate like-spin and unlike-spin functors. The
//! reference scheme stores full N-by-N value/gradient/laplacian matrices
//! (5 N^2 scalars per walker) and patches the moved row and column on every
//! acceptance; the optimized scheme keeps only per-electron accumulators
//! (5 N scalars) and recomputes rows from the distance table when needed.

use crate::distances::CandidateRow;
use crate::splines::CubicBspline1D;
use crate::vec3::Vec3;
use crate::Real;

/// Like/unlike spin-channel functor pair.
#[derive(Debug, Clone)]
pub struct SpinChannels<T: Real> {
    pub like: CubicBspline1D<T>,
    pub unlike: CubicBspline1D<T>,
}

impl<T: Real> SpinChannels<T> {
    #[inline]
    pub fn channel(&self, same_spin: bool) -> &CubicBspline1D<T> {
        if same_spin {
            &self.like
        } else {
            &self.unlike
        }
    }

    pub fn convert<U: Real>(&self) -> SpinChannels<U> {
        SpinChannels { like: self.like.convert(), unlike: self.unlike.convert() }
    }
}

/// Row sums for one electron: the half-sum of pair values (counted once per
/// partner) and the gradient/laplacian of the full ordered-pair log value,
/// which carry the pair-exchange factor of two.
#[derive(Debug, Clone, Copy)]
pub struct PairRowSums<T> {
    pub half_value: T,
    pub grad: Vec3<T>,
    pub lap: T,
}

fn row_sums<T: Real>(
    channels: &SpinChannels<T>,
    k: usize,
    n_up: usize,
    n: usize,
    dists: &[T],
    disp: [&[T]; 3],
) -> PairRowSums<T> {
    let two = T::one() + T::one();
    let k_up = k < n_up;
    let mut half = T::zero();
    let mut grad = [T::zero(); 3];
    let mut lap = T::zero();
    // Spin blocks are index-contiguous, so the channel switches once.
    for i in 0..n {
        if i == k {
            continue;
        }
        let d = dists[i];
        let (v, dv, d2v) = channels.channel(k_up == (i < n_up)).eval_vgl(d);
        half += v;
        if dv != T::zero() || d2v != T::zero() {
            let inv_d = T::one() / d;
            let pref = two * dv * inv_d;
            grad[0] -= pref * disp[0][i];
            grad[1] -= pref * disp[1][i];
            grad[2] -= pref * disp[2][i];
            lap += two * (d2v + two * dv * inv_d);
        }
    }
    PairRowSums { half_value: half, grad, lap }
}

/// Value half-sum only (the ratio fast path).
fn row_half_value<T: Real>(
    channels: &SpinChannels<T>,
    k: usize,
    n_up: usize,
    n: usize,
    dists: &[T],
) -> T {
    let k_up = k < n_up;
    let mut half = T::zero();
    for i in 0..n {
        if i == k {
            continue;
        }
        half += channels.channel(k_up == (i < n_up)).eval(dists[i]);
    }
    half
}

/// Store-everything scheme: full pair matrices.
#[derive(Debug, Clone)]
pub struct TwoBodyJastrowRef<T: Real> {
    channels: SpinChannels<T>,
    n: usize,
    n_up: usize,
    u_mat: Vec<T>,
    grad_mat: Vec<Vec3<T>>,
    lap_mat: Vec<T>,
    temp_u: Vec<T>,
    temp_grad: Vec<Vec3<T>>,
    temp_lap: Vec<T>,
    staged: Option<usize>,
}

impl<T: Real> TwoBodyJastrowRef<T> {
    pub fn new(channels: SpinChannels<T>, n: usize, n_up: usize) -> Self {
        Self {
            channels,
            n,
            n_up,
            u_mat: vec![T::zero(); n * n],
            grad_mat: vec![[T::zero(); 3]; n * n],
            lap_mat: vec![T::zero(); n * n],
            temp_u: vec![T::zero(); n],
            temp_grad: vec![[T::zero(); 3]; n],
            temp_lap: vec![T::zero(); n],
            staged: None,
        }
    }

    /// Rebuild one electron's matrix row (and nothing else) from a distance
    /// row against all others; a full rebuild loops this over every k and
    /// ends with a current, symmetric matrix set.
    pub fn rebuild_row(&mut self, k: usize, dists: &[T], disp: [&[T]; 3]) {
        let two = T::one() + T::one();
        let k_up = k < self.n_up;
        for i in 0..self.n {
            let idx = k * self.n + i;
            if i == k {
                self.u_mat[idx] = T::zero();
                self.grad_mat[idx] = [T::zero(); 3];
                self.lap_mat[idx] = T::zero();
                continue;
            }
            let d = dists[i];
            let (v, dv, d2v) = self.channels.channel(k_up == (i < self.n_up)).eval_vgl(d);
            self.u_mat[idx] = v;
            if dv != T::zero() || d2v != T::zero() {
                let inv_d = T::one() / d;
                let pref = dv * inv_d;
                self.grad_mat[idx] = [-pref * disp[0][i], -pref * disp[1][i], -pref * disp[2][i]];
                self.lap_mat[idx] = d2v + two * dv * inv_d;
            } else {
                self.grad_mat[idx] = [T::zero(); 3];
                self.lap_mat[idx] = T::zero();
            }
        }
        self.staged = None;
    }

    /// Log-value change for moving electron `k` to the candidate row, read
    /// against the stored old row; fills the temporaries copied on accept.
    pub fn stage_move(&mut self, k: usize, cand: &CandidateRow<'_, T>) -> f64 {
        let two = T::one() + T::one();
        let k_up = k < self.n_up;
        let mut delta = 0.0f64;
        for i in 0..self.n {
            if i == k {
                self.temp_u[i] = T::zero();
                self.temp_grad[i] = [T::zero(); 3];
                self.temp_lap[i] = T::zero();
                continue;
            }
            let d = cand.dists[i];
            let (v, dv, d2v) = self.channels.channel(k_up == (i < self.n_up)).eval_vgl(d);
            self.temp_u[i] = v;
            if dv != T::zero() || d2v != T::zero() {
                let inv_d = T::one() / d;
                let pref = dv * inv_d;
                self.temp_grad[i] =
                    [-pref * cand.disp[0][i], -pref * cand.disp[1][i], -pref * cand.disp[2][i]];
                self.temp_lap[i] = d2v + two * dv * inv_d;
            } else {
                self.temp_grad[i] = [T::zero(); 3];
                self.temp_lap[i] = T::zero();
            }
            delta += v.to_f64() - self.u_mat[k * self.n + i].to_f64();
        }
        self.staged = Some(k);
        // Ordered-pair convention: the moved electron appears in both the
        // (k, i) and (i, k) terms.
        2.0 * delta
    }

    pub fn staged_grad(&self) -> Vec3<f64> {
        debug_assert!(self.staged.is_some(), "stage_move first");
        let mut g = [0.0f64; 3];
        for i in 0..self.n {
            for d in 0..3 {
                g[d] += 2.0 * self.temp_grad[i][d].to_f64();
            }
        }
        g
    }

    /// Copy the temporary row into row k and mirror it into column k.
    pub fn accept_move(&mut self, k: usize) {
        debug_assert_eq!(self.staged, Some(k));
        for i in 0..self.n {
            let row_idx = k * self.n + i;
            let col_idx = i * self.n + k;
            self.u_mat[row_idx] = self.temp_u[i];
            self.u_mat[col_idx] = self.temp_u[i];
            let g = self.temp_grad[i];
            self.grad_mat[row_idx] = g;
            self.grad_mat[col_idx] = [-g[0], -g[1], -g[2]];
            self.lap_mat[row_idx] = self.temp_lap[i];
            self.lap_mat[col_idx] = self.temp_lap[i];
        }
        self.staged = None;
    }

    pub fn reject_move(&mut self) {
        self.staged = None;
    }

    /// Ordered-pair log value from the stored matrix.
    pub fn value(&self) -> f64 {
        let mut total = 0.0;
        for k in 0..self.n {
            for i in 0..self.n {
                if i != k {
                    total += self.u_mat[k * self.n + i].to_f64();
                }
            }
        }
        total
    }

    /// (grad, lap) of ln Psi for electron k from the stored matrices.
    pub fn electron_derivs(&self, k: usize) -> (Vec3<f64>, f64) {
        let mut g = [0.0f64; 3];
        let mut l = 0.0f64;
        for i in 0..self.n {
            let idx = k * self.n + i;
            for d in 0..3 {
                g[d] += 2.0 * self.grad_mat[idx][d].to_f64();
            }
            l += 2.0 * self.lap_mat[idx].to_f64();
        }
        (g, l)
    }

    pub fn buffer_len(&self) -> usize {
        5 * self.n * self.n
    }

    pub fn write_buffer(&self, out: &mut [f64]) {
        let nn = self.n * self.n;
        for i in 0..nn {
            out[i] = self.u_mat[i].to_f64();
            for d in 0..3 {
                out[nn + 3 * i + d] = self.grad_mat[i][d].to_f64();
            }
            out[4 * nn + i] = self.lap_mat[i].to_f64();
        }
    }

    pub fn read_buffer(&mut self, input: &[f64]) {
        let nn = self.n * self.n;
        for i in 0..nn {
            self.u_mat[i] = T::from_f64(input[i]);
            for d in 0..3 {
                self.grad_mat[i][d] = T::from_f64(input[nn + 3 * i + d]);
            }
            self.lap_mat[i] = T::from_f64(input[4 * nn + i]);
        }
        self.staged = None;
    }

    pub fn storage_scalars(&self) -> usize {
        5 * self.n * self.n
    }
}

/// Compute-on-the-fly scheme: per-electron accumulators only.
#[derive(Debug, Clone)]
pub struct TwoBodyJastrowOpt<T: Real> {
    channels: SpinChannels<T>,
    n: usize,
    n_up: usize,
    u: Vec<T>,
    grad: Vec<Vec3<T>>,
    lap: Vec<T>,
    staged: Option<(usize, PairRowSums<T>)>,
}

impl<T: Real> TwoBodyJastrowOpt<T> {
    pub fn new(channels: SpinChannels<T>, n: usize, n_up: usize) -> Self {
        Self {
            channels,
            n,
            n_up,
            u: vec![T::zero(); n],
            grad: vec![[T::zero(); 3]; n],
            lap: vec![T::zero(); n],
            staged: None,
        }
    }

    pub fn channels(&self) -> &SpinChannels<T> {
        &self.channels
    }

    /// Log-value change for moving electron `k`: candidate row against a
    /// freshly computed current row (nothing is read from stored state).
    pub fn stage_move(
        &mut self,
        k: usize,
        cand: &CandidateRow<'_, T>,
        current_dists: &[T],
    ) -> f64 {
        let new = row_sums(&self.channels, k, self.n_up, self.n, cand.dists, cand.disp);
        let old_half = row_half_value(&self.channels, k, self.n_up, self.n, current_dists);
        self.staged = Some((k, new));
        2.0 * (new.half_value.to_f64() - old_half.to_f64())
    }

    pub fn staged_grad(&self) -> Vec3<f64> {
        let (_, s) = self.staged.as_ref().expect("stage_move first");
        [s.grad[0].to_f64(), s.grad[1].to_f64(), s.grad[2].to_f64()]
    }

    pub fn accept_move(&mut self, k: usize) {
        let (staged_k, s) = self.staged.take().expect("accept without staged move");
        debug_assert_eq!(staged_k, k);
        // Partners' accumulators go stale here; they are refreshed from the
        // distance table at the next measurement.
        self.u[k] = s.half_value;
        self.grad[k] = s.grad;
        self.lap[k] = s.lap;
    }

    pub fn reject_move(&mut self) {
        self.staged = None;
    }

    /// (grad, lap) of ln Psi for electron k from a fresh row, without
    /// touching stored state (the drift evaluation path).
    pub fn row_derivs(&self, k: usize, dists: &[T], disp: [&[T]; 3]) -> (Vec3<f64>, f64) {
        let sums = row_sums(&self.channels, k, self.n_up, self.n, dists, disp);
        (
            [sums.grad[0].to_f64(), sums.grad[1].to_f64(), sums.grad[2].to_f64()],
            sums.lap.to_f64(),
        )
    }

    /// Recompute electron k's accumulators from a fresh row.
    pub fn refresh_electron(
        &mut self,
        k: usize,
        dists: &[T],
        disp: [&[T]; 3],
    ) -> (Vec3<f64>, f64) {
        let sums = row_sums(&self.channels, k, self.n_up, self.n, dists, disp);
        self.u[k] = sums.half_value;
        self.grad[k] = sums.grad;
        self.lap[k] = sums.lap;
        (
            [sums.grad[0].to_f64(), sums.grad[1].to_f64(), sums.grad[2].to_f64()],
            sums.lap.to_f64(),
        )
    }

    /// Ordered-pair log value: each unordered pair is held once in both
    /// partners' half-sums.
    pub fn value(&self) -> f64 {
        self.u.iter().map(|&x| x.to_f64()).sum()
    }

    pub fn buffer_len(&self) -> usize {
        5 * self.n
    }

    pub fn write_buffer(&self, out: &mut [f64]) {
        let n = self.n;
        for k in 0..n {
            out[k] = self.u[k].to_f64();
            for d in 0..3 {
                out[n + 3 * k + d] = self.grad[k][d].to_f64();
            }
            out[4 * n + k] = self.lap[k].to_f64();
        }
    }

    pub fn read_buffer(&mut self, input: &[f64]) {
        let n = self.n;
        for k in 0..n {
            self.u[k] = T::from_f64(input[k]);
            for d in 0..3 {
                self.grad[k][d] = T::from_f64(input[n + 3 * k + d]);
            }
            self.lap[k] = T::from_f64(input[4 * n + k]);
        }
        self.staged = None;
    }

    pub fn storage_scalars(&self) -> usize {
        5 * self.n
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distances::{PaddedAATable, UpdatePolicy};
    use crate::lattice::Cell;
    use crate::particles::ParticleSet;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn channels() -> SpinChannels<f64> {
        SpinChannels {
            like: CubicBspline1D::fit(|r| 0.35 * (1.0 - r / 3.5).powi(2), 3.5, 16).unwrap(),
            unlike: CubicBspline1D::fit(|r| 0.5 * (1.0 - r / 4.0).powi(2), 4.0, 16).unwrap(),
        }
    }

    fn random_system(n: usize, seed: u64) -> (Cell, ParticleSet<f64>, PaddedAATable<f64>) {
        let cell = Cell::periodic([9.0, 9.0, 9.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pos: Vec<[f64; 3]> = (0..n)
            .map(|_| [rng.gen_range(0.0..9.0), rng.gen_range(0.0..9.0), rng.gen_range(0.0..9.0)])
            .collect();
        let ps = ParticleSet::electrons(pos);
        let mut aa = PaddedAATable::new(n, cell, UpdatePolicy::OnTheFly);
        aa.evaluate_all(&ps).unwrap();
        (cell, ps, aa)
    }

    fn rebuild_both(
        n: usize,
        n_up: usize,
        ps: &ParticleSet<f64>,
        aa: &mut PaddedAATable<f64>,
    ) -> (TwoBodyJastrowRef<f64>, TwoBodyJastrowOpt<f64>) {
        let mut j_ref = TwoBodyJastrowRef::new(channels(), n, n_up);
        let mut j_opt = TwoBodyJastrowOpt::new(channels(), n, n_up);
        for k in 0..n {
            let row = aa.row_fresh(k, ps).unwrap();
            j_opt.refresh_electron(k, row.dists, row.disp);
        }
        // Reference path reads the same rows.
        for k in 0..n {
            let row = aa.row(k).unwrap();
            j_ref.rebuild_row(k, row.dists, row.disp);
        }
        (j_ref, j_opt)
    }

    #[test]
    fn constant_functor_counts_ordered_pairs() {
        // U2 == c inside a cutoff that covers every pair: the log value is
        // c times the number of ordered pairs.
        let cell = Cell::periodic([100.0, 100.0, 100.0]).unwrap();
        let pos = vec![[1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [1.5, 1.0, 0.0], [1.2, 0.3, 0.8]];
        let ps = ParticleSet::electrons(pos);
        let c = 0.25;
        // Enough knots that the forced zero at the cutoff has decayed to
        // nothing at the pair distances (all < 3).
        let flat = CubicBspline1D::fit(move |_| c, 50.0, 64).unwrap();
        let ch = SpinChannels { like: flat.clone(), unlike: flat };
        let mut aa = PaddedAATable::new(4, cell, UpdatePolicy::OnTheFly);
        aa.evaluate_all(&ps).unwrap();
        let mut j = TwoBodyJastrowOpt::new(ch, 4, 2);
        for k in 0..4 {
            let row = aa.row_fresh(k, &ps).unwrap();
            j.refresh_electron(k, row.dists, row.disp);
        }
        assert_relative_eq!(j.value(), c * 12.0, epsilon = 1e-10);
    }

    #[test]
    fn ref_and_opt_agree_on_value_and_derivs() {
        let n = 10;
        let (_, ps, mut aa) = random_system(n, 7);
        let (j_ref, j_opt) = rebuild_both(n, 5, &ps, &mut aa);
        assert_relative_eq!(j_ref.value(), j_opt.value(), epsilon = 1e-10);
        for k in 0..n {
            let (gr, lr) = j_ref.electron_derivs(k);
            let go = [j_opt.grad[k][0], j_opt.grad[k][1], j_opt.grad[k][2]];
            for d in 0..3 {
                assert_relative_eq!(gr[d], go[d], epsilon = 1e-10);
            }
            assert_relative_eq!(lr, j_opt.lap[k], epsilon = 1e-10);
        }
    }

    #[test]
    fn delta_matches_brute_force_difference() {
        let n = 8;
        let n_up = 4;
        let (cell, mut ps, mut aa) = random_system(n, 11);
        let (mut j_ref, mut j_opt) = rebuild_both(n, n_up, &ps, &mut aa);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let brute = |ps: &ParticleSet<f64>| {
            let ch = channels();
            let mut total = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let (d, _) = cell.min_image_disp(ps.position(i), ps.position(j));
                    total += ch.channel((i < n_up) == (j < n_up)).eval(d);
                }
            }
            total
        };
        for mv in 0..30 {
            let k = rng.gen_range(0..n);
            let r_new = [rng.gen_range(0.0..9.0), rng.gen_range(0.0..9.0), rng.gen_range(0.0..9.0)];
            let before = brute(&ps);
            aa.stage_candidate_row(k, r_new, &ps).unwrap();
            let (delta_ref, delta_opt) = {
                let cur = {
                    // fresh current row for the opt path
                    let row = aa.row(k).unwrap();
                    row.dists.to_vec()
                };
                let cand = aa.candidate_row();
                (j_ref.stage_move(k, &cand), j_opt.stage_move(k, &cand, &cur))
            };
            assert_relative_eq!(delta_ref, delta_opt, epsilon = 1e-10);
            let accept = mv % 2 == 0;
            if accept {
                aa.accept_move(k).unwrap();
                ps.set_position(k, r_new).unwrap();
                j_ref.accept_move(k);
                j_opt.accept_move(k);
                let after = brute(&ps);
                assert_relative_eq!(delta_ref, after - before, epsilon = 1e-9);
            } else {
                aa.reject_move();
                j_ref.reject_move();
                j_opt.reject_move();
            }
            // keep rows current for the next iteration (measurement cadence)
            aa.evaluate_all(&ps).unwrap();
        }
    }

    #[test]
    fn storage_accounting_is_exact() {
        let j_ref = TwoBodyJastrowRef::<f64>::new(channels(), 768, 384);
        let j_opt = TwoBodyJastrowOpt::<f64>::new(channels(), 768, 384);
        assert_eq!(j_ref.storage_scalars(), 5 * 768 * 768);
        assert_eq!(j_opt.storage_scalars(), 5 * 768);
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let n = 6;
        let n_up = 3;
        let (cell, mut ps, mut aa) = random_system(n, 19);
        let (_, mut j_opt) = rebuild_both(n, n_up, &ps, &mut aa);
        let brute = |ps: &ParticleSet<f64>| {
            let ch = channels();
            let mut total = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        let (d, _) = cell.min_image_disp(ps.position(i), ps.position(j));
                        total += ch.channel((i < n_up) == (j < n_up)).eval(d);
                    }
                }
            }
            total
        };
        let k = 2;
        let row = aa.row_fresh(k, &ps).unwrap();
        let (g, lap) = {
            let sums = row_sums(j_opt.channels(), k, n_up, n, row.dists, row.disp);
            ([sums.grad[0], sums.grad[1], sums.grad[2]], sums.lap)
        };
        let h = 1e-5;
        let mut fd_lap = 0.0;
        let f0 = brute(&ps);
        for d in 0..3 {
            let orig = ps.position(k);
            let mut plus = orig;
            plus[d] += h;
            ps.set_position(k, plus).unwrap();
            let fp = brute(&ps);
            let mut minus = orig;
            minus[d] -= h;
            ps.set_position(k, minus).unwrap();
            let fm = brute(&ps);
            ps.set_position(k, orig).unwrap();
            assert_relative_eq!(g[d], (fp - fm) / (2.0 * h), max_relative = 1e-6, epsilon = 1e-8);
            fd_lap += (fp - 2.0 * f0 + fm) / (h * h);
        }
        assert_relative_eq!(lap, fd_lap, max_relative = 1e-4, epsilon = 1e-4);
        let _ = j_opt.value();
    }
}
