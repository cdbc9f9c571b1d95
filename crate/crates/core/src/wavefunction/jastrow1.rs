//! One-body (electron-ion) Jastrow component.
//!
//! Keeps per-electron accumulators only: the summed value, gradient and
//! laplacian of sum_I U_I(|r_I - r_k|) for each electron k, 5N scalars.
//! Because each electron's contribution depends only on its own position,
//! acceptance updates are exact with no cross-electron staleness.

use crate::distances::{ABTable, CandidateRow};
use crate::splines::CubicBspline1D;
use crate::vec3::Vec3;
use crate::Real;

/// Value, gradient and laplacian of one electron's ion sum.
#[derive(Debug, Clone, Copy)]
pub struct RadialSums<T> {
    pub value: T,
    pub grad: Vec3<T>,
    pub lap: T,
}

#[derive(Debug, Clone)]
pub struct OneBodyJastrow<T: Real> {
    /// One radial functor per ion species.
    functors: Vec<CubicBspline1D<T>>,
    /// Species id of each ion, indexing `functors`.
    ion_species: Vec<usize>,
    u: Vec<T>,
    grad: Vec<Vec3<T>>,
    lap: Vec<T>,
    staged: Option<(usize, RadialSums<T>)>,
}

impl<T: Real> OneBodyJastrow<T> {
    pub fn new(functors: Vec<CubicBspline1D<T>>, ion_species: Vec<usize>, n_elec: usize) -> Self {
        Self {
            functors,
            ion_species,
            u: vec![T::zero(); n_elec],
            grad: vec![[T::zero(); 3]; n_elec],
            lap: vec![T::zero(); n_elec],
            staged: None,
        }
    }

    pub fn convert<U: Real>(&self) -> OneBodyJastrow<U> {
        OneBodyJastrow {
            functors: self.functors.iter().map(|f| f.convert()).collect(),
            ion_species: self.ion_species.clone(),
            u: self.u.iter().map(|&x| U::from_f64(x.to_f64())).collect(),
            grad: self
                .grad
                .iter()
                .map(|g| [U::from_f64(g[0].to_f64()), U::from_f64(g[1].to_f64()), U::from_f64(g[2].to_f64())])
                .collect(),
            lap: self.lap.iter().map(|&x| U::from_f64(x.to_f64())).collect(),
            staged: None,
        }
    }

    /// Sums over one distance row (committed or candidate).
    ///
    /// The displacement convention is `disp = r_I - r_e`, so the gradient
    /// with respect to the electron is -U'(d) * disp / d.
    pub fn row_sums(&self, dists: &[T], disp: [&[T]; 3], n_ion: usize) -> RadialSums<T> {
        let mut value = T::zero();
        let mut grad = [T::zero(); 3];
        let mut lap = T::zero();
        for i in 0..n_ion {
            let d = dists[i];
            let (v, dv, d2v) = self.functors[self.ion_species[i]].eval_vgl(d);
            value += v;
            // Outside the cutoff all three are exactly zero, so the huge
            // self-distance sentinel contributes nothing here.
            if dv != T::zero() || d2v != T::zero() {
                let inv_d = T::one() / d;
                let pref = dv * inv_d;
                grad[0] -= pref * disp[0][i];
                grad[1] -= pref * disp[1][i];
                grad[2] -= pref * disp[2][i];
                lap += d2v + (T::one() + T::one()) * dv * inv_d;
            }
        }
        RadialSums { value, grad, lap }
    }

    /// Log-value change for moving electron `k` to the staged candidate row;
    /// stages the candidate sums for a later accept.
    pub fn stage_move(&mut self, k: usize, cand: &CandidateRow<'_, T>, n_ion: usize) -> f64 {
        let new = self.row_sums(cand.dists, cand.disp, n_ion);
        let delta = new.value.to_f64() - self.u[k].to_f64();
        self.staged = Some((k, new));
        delta
    }

    pub fn staged_grad(&self) -> Vec3<f64> {
        let (_, s) = self.staged.as_ref().expect("stage_move first");
        [s.grad[0].to_f64(), s.grad[1].to_f64(), s.grad[2].to_f64()]
    }

    pub fn accept_move(&mut self, k: usize) {
        let (staged_k, s) = self.staged.take().expect("accept without staged move");
        debug_assert_eq!(staged_k, k);
        self.u[k] = s.value;
        self.grad[k] = s.grad;
        self.lap[k] = s.lap;
    }

    pub fn reject_move(&mut self) {
        self.staged = None;
    }

    /// Recompute electron `k`'s accumulators from its committed ion row and
    /// return (grad, lap) of ln Psi contributions.
    pub fn refresh_electron(&mut self, k: usize, ab: &ABTable<T>, n_ion: usize) -> (Vec3<f64>, f64) {
        let row = ab.row(k).expect("row index checked by caller");
        let sums = self.row_sums(row.dists, row.disp, n_ion);
        self.u[k] = sums.value;
        self.grad[k] = sums.grad;
        self.lap[k] = sums.lap;
        (
            [sums.grad[0].to_f64(), sums.grad[1].to_f64(), sums.grad[2].to_f64()],
            sums.lap.to_f64(),
        )
    }

    /// Full rebuild; returns the total log-value sum_k U1_k.
    pub fn rebuild(&mut self, ab: &ABTable<T>, n_ion: usize) -> f64 {
        let mut total = 0.0;
        for k in 0..self.u.len() {
            let (_, _) = self.refresh_electron(k, ab, n_ion);
            total += self.u[k].to_f64();
        }
        total
    }

    /// Current total log value from the accumulators.
    pub fn value(&self) -> f64 {
        self.u.iter().map(|&x| x.to_f64()).sum()
    }

    pub fn buffer_len(&self) -> usize {
        5 * self.u.len()
    }

    pub fn write_buffer(&self, out: &mut [f64]) {
        let n = self.u.len();
        for k in 0..n {
            out[k] = self.u[k].to_f64();
            for d in 0..3 {
                out[n + 3 * k + d] = self.grad[k][d].to_f64();
            }
            out[4 * n + k] = self.lap[k].to_f64();
        }
    }

    pub fn read_buffer(&mut self, input: &[f64]) {
        let n = self.u.len();
        for k in 0..n {
            self.u[k] = T::from_f64(input[k]);
            for d in 0..3 {
                self.grad[k][d] = T::from_f64(input[n + 3 * k + d]);
            }
            self.lap[k] = T::from_f64(input[4 * n + k]);
        }
        self.staged = None;
    }

    /// Distance scalars of per-walker state (value + gradient + laplacian).
    pub fn storage_scalars(&self) -> usize {
        5 * self.u.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Cell;
    use crate::particles::ParticleSet;
    use approx::assert_relative_eq;

    fn setup() -> (Cell, ParticleSet<f64>, ParticleSet<f64>, OneBodyJastrow<f64>, ABTable<f64>) {
        let cell = Cell::periodic([12.0, 12.0, 12.0]).unwrap();
        let ions = ParticleSet::new(
            vec![[3.0, 3.0, 3.0], [9.0, 9.0, 9.0]],
            vec![0, 1],
            vec![4.0, 6.0],
        )
        .unwrap();
        let electrons = ParticleSet::electrons(vec![[3.5, 3.0, 3.0], [8.0, 9.5, 9.0], [6.0, 6.0, 6.0]]);
        let f0 = CubicBspline1D::fit(|r| 0.5 * (1.0 - r / 4.0).powi(2), 4.0, 16).unwrap();
        let f1 = CubicBspline1D::fit(|r| -0.3 * (1.0 - r / 3.0).powi(3), 3.0, 16).unwrap();
        let j1 = OneBodyJastrow::new(vec![f0, f1], vec![0, 1], 3);
        let mut ab = ABTable::new(3, 2, cell);
        ab.evaluate_all(&electrons, &ions).unwrap();
        (cell, electrons, ions, j1, ab)
    }

    #[test]
    fn rebuild_matches_direct_double_loop() {
        let (cell, electrons, ions, mut j1, ab) = setup();
        let total = j1.rebuild(&ab, 2);
        let mut want = 0.0;
        let f0 = CubicBspline1D::<f64>::fit(|r| 0.5 * (1.0 - r / 4.0).powi(2), 4.0, 16).unwrap();
        let f1 = CubicBspline1D::<f64>::fit(|r| -0.3 * (1.0 - r / 3.0).powi(3), 3.0, 16).unwrap();
        for e in 0..3 {
            for (i, f) in [(0, &f0), (1, &f1)] {
                let (d, _) = cell.min_image_disp(electrons.position(e), ions.position(i));
                want += f.eval(d);
            }
        }
        assert_relative_eq!(total, want, epsilon = 1e-12);
        assert_relative_eq!(j1.value(), want, epsilon = 1e-12);
    }

    #[test]
    fn stage_accept_updates_only_moved_electron() {
        let (_, _, ions, mut j1, mut ab) = setup();
        j1.rebuild(&ab, 2);
        let before_u1 = j1.u[1];
        ab.stage_candidate_row(0, [2.5, 3.0, 3.0], &ions).unwrap();
        let delta = {
            let cand = ab.candidate_row();
            j1.stage_move(0, &cand, 2)
        };
        let old_u0 = j1.u[0].to_f64();
        j1.accept_move(0);
        assert_relative_eq!(j1.u[0].to_f64() - old_u0, delta, epsilon = 1e-12);
        assert_eq!(j1.u[1], before_u1);
    }

    #[test]
    fn reject_leaves_state_bitwise_unchanged() {
        let (_, _, ions, mut j1, mut ab) = setup();
        j1.rebuild(&ab, 2);
        let snapshot = j1.u.clone();
        ab.stage_candidate_row(2, [1.0, 2.0, 3.0], &ions).unwrap();
        {
            let cand = ab.candidate_row();
            j1.stage_move(2, &cand, 2);
        }
        j1.reject_move();
        let bits_before: Vec<u64> = snapshot.iter().map(|x| x.to_bits()).collect();
        let bits_after: Vec<u64> = j1.u.iter().map(|x| x.to_bits()).collect();
        assert_eq!(bits_before, bits_after);
    }

    #[test]
    fn gradient_points_along_ion_axis() {
        // Single ion, electron displaced along +x: the gradient of ln Psi is
        // radial, so only the x component survives.
        let cell = Cell::periodic([20.0, 20.0, 20.0]).unwrap();
        let ions = ParticleSet::new(vec![[10.0, 10.0, 10.0]], vec![0], vec![4.0]).unwrap();
        let electrons = ParticleSet::electrons(vec![[11.2, 10.0, 10.0]]);
        let f = CubicBspline1D::fit(|r| 0.4 * (1.0 - r / 5.0).powi(2), 5.0, 24).unwrap();
        let mut j1 = OneBodyJastrow::new(vec![f], vec![0], 1);
        let mut ab = ABTable::new(1, 1, cell);
        ab.evaluate_all(&electrons, &ions).unwrap();
        let (g, _) = j1.refresh_electron(0, &ab, 1);
        assert!(g[0].abs() > 1e-3);
        assert!(g[1].abs() < 1e-14 && g[2].abs() < 1e-14);
    }

    #[test]
    fn buffer_round_trip() {
        let (_, _, _, mut j1, ab) = setup();
        j1.rebuild(&ab, 2);
        let mut buf = vec![0.0; j1.buffer_len()];
        j1.write_buffer(&mut buf);
        let mut other = j1.clone();
        other.u.iter_mut().for_each(|x| *x = 0.0);
        other.read_buffer(&buf);
        assert_eq!(
            j1.u.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            other.u.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
        assert_eq!(j1.storage_scalars(), 15);
    }
}
