//! Electron-electron (AA) and electron-ion (AB) distance tables.
//!
//! Three AA storage schemes are provided:
//!
//! - packed upper triangle, N(N-1)/2 scalars, all pair entries involving the
//!   moved particle rewritten on acceptance (the reference scheme);
//! - padded full rows with forward update: on acceptance row k is copied from
//!   the candidate row and only the column entries needed by future moves
//!   (k' > k in the ascending sweep) are written;
//! - padded full rows computed on the fly: on acceptance only row k is
//!   written and consumers recompute a row from current positions when it is
//!   marked stale.
//!
//! Every scheme stages a candidate 1-by-N row before a move and commits or
//! discards it, so downstream ratio kernels consume identical data. Sweeps
//! must move particles in ascending index order; that ordering is what makes
//! the forward-update scheme sound.

use crate::containers::{padded_size, AlignedSoAVector, DEFAULT_BLOCK};
use crate::error::{QmcError, Result};
use crate::lattice::Cell;
use crate::particles::ParticleSet;
use crate::vec3::Vec3;
use crate::Real;

/// Column maintenance policy for the padded AA table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdatePolicy {
    ForwardUpdate,
    OnTheFly,
}

/// Candidate distances/displacements staged for one particle move.
/// Displacement lane `d`, slot `i` holds component `d` of `r_i - r_new`.
pub struct CandidateRow<'a, T> {
    pub dists: &'a [T],
    pub disp: [&'a [T]; 3],
}

/// Committed distances/displacements of one row. Slot `j` of row `i` holds
/// `|r_j - r_i|` and the lanes hold `r_j - r_i`.
pub struct RowView<'a, T> {
    pub dists: &'a [T],
    pub disp: [&'a [T]; 3],
}

/// 1-by-N row kernel over SoA lanes: distances and displacements from
/// `origin` to the first `n` source positions. Output slots beyond `n` are
/// untouched.
#[inline]
fn fill_row<T: Real>(
    cell: &Cell,
    origin: Vec3<T>,
    soa: &AlignedSoAVector<T>,
    n: usize,
    dists: &mut [T],
    dx: &mut [T],
    dy: &mut [T],
    dz: &mut [T],
) {
    for (d, out) in [&mut *dx, &mut *dy, &mut *dz].into_iter().enumerate() {
        let lane = &soa.lane(d)[..n];
        if cell.periodic[d] {
            let len = T::from_f64(cell.lengths[d]);
            for i in 0..n {
                let x = lane[i] - origin[d];
                out[i] = x - (x / len).round() * len;
            }
        } else {
            for i in 0..n {
                out[i] = lane[i] - origin[d];
            }
        }
    }
    for i in 0..n {
        dists[i] = (dx[i] * dx[i] + dy[i] * dy[i] + dz[i] * dz[i]).sqrt();
    }
}

/// Reference AA table: packed upper triangle.
#[derive(Debug, Clone)]
pub struct PackedAATable<T: Real> {
    n: usize,
    cell: Cell,
    /// Pair (i < j) at index i*n - i*(i+1)/2 + (j - i - 1).
    upper: Vec<T>,
    /// Displacement r_j - r_i for pair (i < j), AoS like the rest of the
    /// reference path.
    disp_upper: Vec<Vec3<T>>,
    temp_d: Vec<T>,
    temp_disp: [Vec<T>; 3],
    staged: Option<usize>,
}

impl<T: Real> PackedAATable<T> {
    pub fn new(n: usize, cell: Cell) -> Self {
        let pairs = n * (n - 1) / 2;
        Self {
            n,
            cell,
            upper: vec![T::zero(); pairs],
            disp_upper: vec![[T::zero(); 3]; pairs],
            temp_d: vec![T::SELF_DIST; n],
            temp_disp: [vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n]],
            staged: None,
        }
    }

    #[inline]
    fn pair_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j);
        i * self.n - i * (i + 1) / 2 + (j - i - 1)
    }

    pub fn evaluate_all(&mut self, electrons: &ParticleSet<T>) -> Result<()> {
        if electrons.len() != self.n {
            return Err(QmcError::SizeMismatch { expected: self.n, got: electrons.len() });
        }
        for i in 0..self.n {
            let a = electrons.position(i);
            for j in i + 1..self.n {
                let (dist, disp) = self.cell.min_image_disp(a, electrons.position(j));
                let idx = self.pair_index(i, j);
                self.upper[idx] = dist;
                self.disp_upper[idx] = disp;
            }
        }
        self.staged = None;
        Ok(())
    }

    pub fn stage_candidate_row(
        &mut self,
        k: usize,
        r_new: Vec3<T>,
        electrons: &ParticleSet<T>,
    ) -> Result<()> {
        if k >= self.n {
            return Err(QmcError::OutOfRange { index: k, len: self.n });
        }
        // Reference path: per-particle loop over the AoS positions. The
        // arithmetic per element is identical to the SoA row kernel, so the
        // two schemes stay bitwise comparable.
        let [dx, dy, dz] = &mut self.temp_disp;
        for (i, p) in electrons.positions().iter().enumerate() {
            let mut r2 = T::zero();
            for (d, out) in [&mut *dx, &mut *dy, &mut *dz].into_iter().enumerate() {
                let mut x = p[d] - r_new[d];
                if self.cell.periodic[d] {
                    let len = T::from_f64(self.cell.lengths[d]);
                    x = x - (x / len).round() * len;
                }
                out[i] = x;
                r2 += x * x;
            }
            self.temp_d[i] = r2.sqrt();
        }
        self.temp_d[k] = T::SELF_DIST;
        dx[k] = T::zero();
        dy[k] = T::zero();
        dz[k] = T::zero();
        self.staged = Some(k);
        Ok(())
    }

    pub fn accept_move(&mut self, k: usize) -> Result<()> {
        if self.staged != Some(k) {
            return Err(QmcError::Logic(format!("accept_move({k}) without staged candidate")));
        }
        // All N-1 pair entries involving k, scattered across the triangle.
        for i in 0..k {
            let idx = self.pair_index(i, k);
            self.upper[idx] = self.temp_d[i];
            self.disp_upper[idx] =
                [-self.temp_disp[0][i], -self.temp_disp[1][i], -self.temp_disp[2][i]];
        }
        for j in k + 1..self.n {
            let idx = self.pair_index(k, j);
            self.upper[idx] =
                self.temp_d[j];
            self.disp_upper[idx] =
                [self.temp_disp[0][j], self.temp_disp[1][j], self.temp_disp[2][j]];
        }
        self.staged = None;
        Ok(())
    }

    pub fn reject_move(&mut self) {
        self.staged = None;
    }

    pub fn candidate_row(&self) -> CandidateRow<'_, T> {
        CandidateRow {
            dists: &self.temp_d,
            disp: [&self.temp_disp[0], &self.temp_disp[1], &self.temp_disp[2]],
        }
    }

    pub fn dist(&self, i: usize, j: usize) -> Result<T> {
        if i >= self.n || j >= self.n {
            return Err(QmcError::OutOfRange { index: i.max(j), len: self.n });
        }
        if i == j {
            return Ok(T::SELF_DIST);
        }
        Ok(self.upper[self.pair_index(i.min(j), i.max(j))])
    }

    /// Gather row `i` (distances and displacements pointing away from `i`)
    /// into caller buffers of length >= n.
    pub fn gather_row(&self, i: usize, dists: &mut [T], disp: &mut [Vec<T>; 3]) -> Result<()> {
        if i >= self.n {
            return Err(QmcError::OutOfRange { index: i, len: self.n });
        }
        for j in 0..self.n {
            if j == i {
                dists[j] = T::SELF_DIST;
                for lane in disp.iter_mut() {
                    lane[j] = T::zero();
                }
                continue;
            }
            let idx = self.pair_index(i.min(j), i.max(j));
            dists[j] = self.upper[idx];
            let sign = if i < j { T::one() } else { -T::one() };
            for (d, lane) in disp.iter_mut().enumerate() {
                lane[j] = self.disp_upper[idx][d] * sign;
            }
        }
        Ok(())
    }

    /// Distance scalars held (displacements excluded).
    pub fn storage_scalars(&self) -> usize {
        self.upper.len()
    }
}

/// Optimized AA table: full padded rows.
#[derive(Debug, Clone)]
pub struct PaddedAATable<T: Real> {
    n: usize,
    n_padded: usize,
    cell: Cell,
    policy: UpdatePolicy,
    /// Row-major distances, one padded row per particle.
    rows: Vec<T>,
    /// Row-major displacement lanes: row i, lane d at (i*3 + d)*n_padded.
    disp: Vec<T>,
    temp_d: Vec<T>,
    temp_disp: [Vec<T>; 3],
    stale: Vec<bool>,
    staged: Option<usize>,
}

impl<T: Real> PaddedAATable<T> {
    pub fn new(n: usize, cell: Cell, policy: UpdatePolicy) -> Self {
        let n_padded = padded_size(n, DEFAULT_BLOCK).expect("default block is nonzero");
        Self {
            n,
            n_padded,
            cell,
            policy,
            rows: vec![T::SELF_DIST; n * n_padded],
            disp: vec![T::zero(); n * 3 * n_padded],
            temp_d: vec![T::SELF_DIST; n_padded],
            temp_disp: [
                vec![T::zero(); n_padded],
                vec![T::zero(); n_padded],
                vec![T::zero(); n_padded],
            ],
            stale: vec![true; n],
            staged: None,
        }
    }

    pub fn policy(&self) -> UpdatePolicy {
        self.policy
    }

    pub fn n_padded(&self) -> usize {
        self.n_padded
    }

    pub fn evaluate_all(&mut self, electrons: &ParticleSet<T>) -> Result<()> {
        if electrons.len() != self.n {
            return Err(QmcError::SizeMismatch { expected: self.n, got: electrons.len() });
        }
        for i in 0..self.n {
            self.recompute_row(i, electrons);
        }
        self.stale.fill(false);
        self.staged = None;
        Ok(())
    }

    fn recompute_row(&mut self, i: usize, electrons: &ParticleSet<T>) {
        let np = self.n_padded;
        let origin = electrons.position(i);
        let row_d = &mut self.rows[i * np..(i + 1) * np];
        let base = i * 3 * np;
        let (dx, rest) = self.disp[base..base + 3 * np].split_at_mut(np);
        let (dy, dz) = rest.split_at_mut(np);
        fill_row(&self.cell, origin, electrons.soa(), self.n, row_d, dx, dy, dz);
        row_d[i] = T::SELF_DIST;
        dx[i] = T::zero();
        dy[i] = T::zero();
        dz[i] = T::zero();
        self.stale[i] = false;
    }

    pub fn stage_candidate_row(
        &mut self,
        k: usize,
        r_new: Vec3<T>,
        electrons: &ParticleSet<T>,
    ) -> Result<()> {
        if k >= self.n {
            return Err(QmcError::OutOfRange { index: k, len: self.n });
        }
        let [dx, dy, dz] = &mut self.temp_disp;
        fill_row(&self.cell, r_new, electrons.soa(), self.n, &mut self.temp_d, dx, dy, dz);
        self.temp_d[k] = T::SELF_DIST;
        dx[k] = T::zero();
        dy[k] = T::zero();
        dz[k] = T::zero();
        self.staged = Some(k);
        Ok(())
    }

    pub fn accept_move(&mut self, k: usize) -> Result<()> {
        if self.staged != Some(k) {
            return Err(QmcError::Logic(format!("accept_move({k}) without staged candidate")));
        }
        let np = self.n_padded;
        // Row k comes straight from the staged candidate under both policies.
        self.rows[k * np..k * np + np].copy_from_slice(&self.temp_d);
        let base = k * 3 * np;
        for d in 0..3 {
            self.disp[base + d * np..base + (d + 1) * np].copy_from_slice(&self.temp_disp[d]);
        }
        match self.policy {
            UpdatePolicy::ForwardUpdate => {
                // Strided column writes, but only the entries future moves
                // read; rows k' < k keep stale slot-k entries until the next
                // full evaluation.
                for fut in k + 1..self.n {
                    self.rows[fut * np + k] = self.temp_d[fut];
                    let fbase = fut * 3 * np;
                    for d in 0..3 {
                        self.disp[fbase + d * np + k] = -self.temp_disp[d][fut];
                    }
                }
            }
            UpdatePolicy::OnTheFly => {
                for (i, flag) in self.stale.iter_mut().enumerate() {
                    if i != k {
                        *flag = true;
                    }
                }
            }
        }
        self.stale[k] = false;
        self.staged = None;
        Ok(())
    }

    pub fn reject_move(&mut self) {
        self.staged = None;
    }

    pub fn candidate_row(&self) -> CandidateRow<'_, T> {
        CandidateRow {
            dists: &self.temp_d,
            disp: [&self.temp_disp[0], &self.temp_disp[1], &self.temp_disp[2]],
        }
    }

    pub fn is_stale(&self, i: usize) -> bool {
        self.stale[i]
    }

    /// Row `i` as stored, regardless of staleness.
    pub fn row(&self, i: usize) -> Result<RowView<'_, T>> {
        if i >= self.n {
            return Err(QmcError::OutOfRange { index: i, len: self.n });
        }
        let np = self.n_padded;
        let base = i * 3 * np;
        Ok(RowView {
            dists: &self.rows[i * np..(i + 1) * np],
            disp: [
                &self.disp[base..base + np],
                &self.disp[base + np..base + 2 * np],
                &self.disp[base + 2 * np..base + 3 * np],
            ],
        })
    }

    /// Row `i`, recomputed from current positions first if marked stale
    /// (the on-the-fly consumer path).
    pub fn row_fresh(&mut self, i: usize, electrons: &ParticleSet<T>) -> Result<RowView<'_, T>> {
        if i >= self.n {
            return Err(QmcError::OutOfRange { index: i, len: self.n });
        }
        if self.stale[i] {
            self.recompute_row(i, electrons);
        }
        self.row(i)
    }

    pub fn dist(&self, i: usize, j: usize) -> Result<T> {
        if i >= self.n || j >= self.n {
            return Err(QmcError::OutOfRange { index: i.max(j), len: self.n });
        }
        Ok(self.rows[i * self.n_padded + j])
    }

    /// Distance scalars held (displacements excluded).
    pub fn storage_scalars(&self) -> usize {
        self.n * self.n_padded
    }
}

/// Either AA scheme behind one dispatch point, so drivers can switch between
/// the reference and optimized variants at run time.
#[derive(Debug, Clone)]
pub enum ElecElecTable<T: Real> {
    Packed(PackedAATable<T>),
    Padded(PaddedAATable<T>),
}

impl<T: Real> ElecElecTable<T> {
    pub fn packed(n: usize, cell: Cell) -> Self {
        Self::Packed(PackedAATable::new(n, cell))
    }

    pub fn padded(n: usize, cell: Cell, policy: UpdatePolicy) -> Self {
        Self::Padded(PaddedAATable::new(n, cell, policy))
    }

    pub fn evaluate_all(&mut self, electrons: &ParticleSet<T>) -> Result<()> {
        match self {
            Self::Packed(t) => t.evaluate_all(electrons),
            Self::Padded(t) => t.evaluate_all(electrons),
        }
    }

    pub fn stage_candidate_row(
        &mut self,
        k: usize,
        r_new: Vec3<T>,
        electrons: &ParticleSet<T>,
    ) -> Result<()> {
        match self {
            Self::Packed(t) => t.stage_candidate_row(k, r_new, electrons),
            Self::Padded(t) => t.stage_candidate_row(k, r_new, electrons),
        }
    }

    pub fn accept_move(&mut self, k: usize) -> Result<()> {
        match self {
            Self::Packed(t) => t.accept_move(k),
            Self::Padded(t) => t.accept_move(k),
        }
    }

    pub fn reject_move(&mut self) {
        match self {
            Self::Packed(t) => t.reject_move(),
            Self::Padded(t) => t.reject_move(),
        }
    }

    pub fn candidate_row(&self) -> CandidateRow<'_, T> {
        match self {
            Self::Packed(t) => t.candidate_row(),
            Self::Padded(t) => t.candidate_row(),
        }
    }

    pub fn dist(&self, i: usize, j: usize) -> Result<T> {
        match self {
            Self::Packed(t) => t.dist(i, j),
            Self::Padded(t) => t.dist(i, j),
        }
    }

    pub fn storage_scalars(&self) -> usize {
        match self {
            Self::Packed(t) => t.storage_scalars(),
            Self::Padded(t) => t.storage_scalars(),
        }
    }
}

/// Electron-ion table: one padded row of ion distances per electron. Row i
/// depends only on electron i's position, so acceptance never touches other
/// rows and every committed row stays current.
#[derive(Debug, Clone)]
pub struct ABTable<T: Real> {
    n_targets: usize,
    n_sources: usize,
    n_sources_padded: usize,
    cell: Cell,
    rows: Vec<T>,
    disp: Vec<T>,
    temp_d: Vec<T>,
    temp_disp: [Vec<T>; 3],
    staged: Option<usize>,
}

impl<T: Real> ABTable<T> {
    pub fn new(n_targets: usize, n_sources: usize, cell: Cell) -> Self {
        let np = padded_size(n_sources, DEFAULT_BLOCK).expect("default block is nonzero");
        Self {
            n_targets,
            n_sources,
            n_sources_padded: np,
            cell,
            rows: vec![T::SELF_DIST; n_targets * np],
            disp: vec![T::zero(); n_targets * 3 * np],
            temp_d: vec![T::SELF_DIST; np],
            temp_disp: [vec![T::zero(); np], vec![T::zero(); np], vec![T::zero(); np]],
            staged: None,
        }
    }

    pub fn n_sources(&self) -> usize {
        self.n_sources
    }

    pub fn evaluate_all(&mut self, electrons: &ParticleSet<T>, ions: &ParticleSet<T>) -> Result<()> {
        if electrons.len() != self.n_targets {
            return Err(QmcError::SizeMismatch { expected: self.n_targets, got: electrons.len() });
        }
        if ions.len() != self.n_sources {
            return Err(QmcError::SizeMismatch { expected: self.n_sources, got: ions.len() });
        }
        let np = self.n_sources_padded;
        for i in 0..self.n_targets {
            let row_d = &mut self.rows[i * np..(i + 1) * np];
            let base = i * 3 * np;
            let (dx, rest) = self.disp[base..base + 3 * np].split_at_mut(np);
            let (dy, dz) = rest.split_at_mut(np);
            fill_row(&self.cell, electrons.position(i), ions.soa(), self.n_sources, row_d, dx, dy, dz);
        }
        self.staged = None;
        Ok(())
    }

    pub fn stage_candidate_row(&mut self, k: usize, r_new: Vec3<T>, ions: &ParticleSet<T>) -> Result<()> {
        if k >= self.n_targets {
            return Err(QmcError::OutOfRange { index: k, len: self.n_targets });
        }
        let [dx, dy, dz] = &mut self.temp_disp;
        fill_row(&self.cell, r_new, ions.soa(), self.n_sources, &mut self.temp_d, dx, dy, dz);
        self.staged = Some(k);
        Ok(())
    }

    pub fn accept_move(&mut self, k: usize) -> Result<()> {
        if self.staged != Some(k) {
            return Err(QmcError::Logic(format!("accept_move({k}) without staged candidate")));
        }
        let np = self.n_sources_padded;
        self.rows[k * np..(k + 1) * np].copy_from_slice(&self.temp_d);
        let base = k * 3 * np;
        for d in 0..3 {
            self.disp[base + d * np..base + (d + 1) * np].copy_from_slice(&self.temp_disp[d]);
        }
        self.staged = None;
        Ok(())
    }

    pub fn reject_move(&mut self) {
        self.staged = None;
    }

    pub fn candidate_row(&self) -> CandidateRow<'_, T> {
        CandidateRow {
            dists: &self.temp_d,
            disp: [&self.temp_disp[0], &self.temp_disp[1], &self.temp_disp[2]],
        }
    }

    pub fn row(&self, i: usize) -> Result<RowView<'_, T>> {
        if i >= self.n_targets {
            return Err(QmcError::OutOfRange { index: i, len: self.n_targets });
        }
        let np = self.n_sources_padded;
        let base = i * 3 * np;
        Ok(RowView {
            dists: &self.rows[i * np..(i + 1) * np],
            disp: [
                &self.disp[base..base + np],
                &self.disp[base + np..base + 2 * np],
                &self.disp[base + 2 * np..base + 3 * np],
            ],
        })
    }

    pub fn dist(&self, i: usize, j: usize) -> Result<T> {
        if i >= self.n_targets || j >= self.n_sources {
            return Err(QmcError::OutOfRange { index: i.max(j), len: self.n_targets.max(self.n_sources) });
        }
        Ok(self.rows[i * self.n_sources_padded + j])
    }

    pub fn storage_scalars(&self) -> usize {
        self.n_targets * self.n_sources_padded
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cube(l: f64) -> Cell {
        Cell::periodic([l, l, l]).unwrap()
    }

    fn random_electrons(n: usize, cell: &Cell, seed: u64) -> ParticleSet<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pos: Vec<[f64; 3]> = (0..n)
            .map(|_| {
                [
                    rng.gen_range(0.0..cell.lengths[0]),
                    rng.gen_range(0.0..cell.lengths[1]),
                    rng.gen_range(0.0..cell.lengths[2]),
                ]
            })
            .collect();
        ParticleSet::electrons(pos)
    }

    fn all_tables(n: usize, cell: Cell) -> Vec<ElecElecTable<f64>> {
        vec![
            ElecElecTable::packed(n, cell),
            ElecElecTable::padded(n, cell, UpdatePolicy::ForwardUpdate),
            ElecElecTable::padded(n, cell, UpdatePolicy::OnTheFly),
        ]
    }

    #[test]
    fn two_particles_single_pair() {
        let cell = cube(20.0);
        let ps = ParticleSet::electrons(vec![[1.0, 1.0, 1.0], [3.0, 1.0, 1.0]]);
        let mut t = PackedAATable::<f64>::new(2, cell);
        t.evaluate_all(&ps).unwrap();
        assert_eq!(t.storage_scalars(), 1);
        assert!((t.dist(0, 1).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn equilateral_triangle() {
        let cell = cube(50.0);
        let s = 3.0f64;
        let h = s * 3.0f64.sqrt() / 2.0;
        let ps = ParticleSet::electrons(vec![[0.0, 0.0, 0.0], [s, 0.0, 0.0], [s / 2.0, h, 0.0]]);
        for mut t in all_tables(3, cell) {
            t.evaluate_all(&ps).unwrap();
            for (i, j) in [(0, 1), (0, 2), (1, 2)] {
                assert!((t.dist(i, j).unwrap() - s).abs() < 1e-12);
                assert!((t.dist(j, i).unwrap() - s).abs() < 1e-12);
            }
            assert!(t.dist(1, 1).unwrap() >= 1.0e29);
        }
    }

    #[test]
    fn evaluate_all_matches_pairwise_oracle() {
        let cell = cube(8.5);
        let ps = random_electrons(64, &cell, 21);
        for mut t in all_tables(64, cell) {
            t.evaluate_all(&ps).unwrap();
            for i in 0..64 {
                for j in 0..64 {
                    if i == j {
                        continue;
                    }
                    let (want, _) = cell.min_image_disp(ps.position(i), ps.position(j));
                    assert!((t.dist(i, j).unwrap() - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn size_mismatch_rejected() {
        let cell = cube(5.0);
        let ps = random_electrons(4, &cell, 1);
        let mut t = ElecElecTable::packed(5, cell);
        assert!(t.evaluate_all(&ps).is_err());
        let mut ab = ABTable::<f64>::new(3, 4, cell);
        assert!(ab.evaluate_all(&ps, &ps).is_err());
    }

    #[test]
    fn staged_noop_move_reproduces_committed_row() {
        let cell = cube(9.0);
        let ps = random_electrons(10, &cell, 3);
        let mut t = PaddedAATable::new(10, cell, UpdatePolicy::OnTheFly);
        t.evaluate_all(&ps).unwrap();
        let k = 4;
        t.stage_candidate_row(k, ps.position(k), &ps).unwrap();
        let staged: Vec<f64> = t.candidate_row().dists[..10].to_vec();
        let committed = t.row(k).unwrap().dists[..10].to_vec();
        for i in 0..10 {
            assert!((staged[i] - committed[i]).abs() < 1e-12, "slot {i}");
        }
    }

    #[test]
    fn stage_two_particle_distance() {
        let cell = cube(40.0);
        let ps = ParticleSet::electrons(vec![[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]);
        for mut t in all_tables(2, cell) {
            t.evaluate_all(&ps).unwrap();
            t.stage_candidate_row(0, [7.0, 0.0, 0.0], &ps).unwrap();
            let row = t.candidate_row();
            assert!((row.dists[1] - 5.0).abs() < 1e-15);
            assert!(row.dists[0] >= 1.0e29);
        }
    }

    #[test]
    fn staged_row_matches_oracle() {
        let cell = cube(6.0);
        let ps = random_electrons(17, &cell, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for mut t in all_tables(17, cell) {
            t.evaluate_all(&ps).unwrap();
            for _ in 0..20 {
                let k = rng.gen_range(0..17);
                let r_new = [rng.gen_range(0.0..6.0), rng.gen_range(0.0..6.0), rng.gen_range(0.0..6.0)];
                t.stage_candidate_row(k, r_new, &ps).unwrap();
                let row = t.candidate_row();
                for i in 0..17 {
                    if i == k {
                        continue;
                    }
                    let (want, want_disp) = cell.min_image_disp(r_new, ps.position(i));
                    assert!((row.dists[i] - want).abs() < 1e-12);
                    for d in 0..3 {
                        assert!((row.disp[d][i] - want_disp[d]).abs() < 1e-12);
                    }
                }
                t.reject_move();
            }
        }
    }

    #[test]
    fn accept_without_stage_is_logic_error() {
        let cell = cube(5.0);
        for mut t in all_tables(4, cell) {
            let ps = random_electrons(4, &cell, 8);
            t.evaluate_all(&ps).unwrap();
            assert!(matches!(t.accept_move(2), Err(QmcError::Logic(_))));
            t.stage_candidate_row(1, [0.1, 0.2, 0.3], &ps).unwrap();
            assert!(t.accept_move(2).is_err());
        }
    }

    #[test]
    fn accept_updates_entries_for_future_moves() {
        let cell = cube(12.0);
        let mut ps = random_electrons(9, &cell, 13);
        for mut t in all_tables(9, cell) {
            t.evaluate_all(&ps).unwrap();
            let k = 3;
            let r_new = [5.5, 0.5, 11.0];
            t.stage_candidate_row(k, r_new, &ps).unwrap();
            let staged: Vec<f64> = t.candidate_row().dists[..9].to_vec();
            t.accept_move(k).unwrap();
            for j in k + 1..9 {
                assert!((t.dist(k, j).unwrap() - staged[j]).abs() < 1e-15, "row entry {j}");
                match &t {
                    ElecElecTable::Packed(p) => {
                        assert!((p.dist(j, k).unwrap() - staged[j]).abs() < 1e-15)
                    }
                    ElecElecTable::Padded(p) => {
                        if p.policy() == UpdatePolicy::ForwardUpdate {
                            assert!((p.dist(j, k).unwrap() - staged[j]).abs() < 1e-15);
                        }
                    }
                }
            }
        }
        ps.set_position(0, [0.0, 0.0, 0.0]).unwrap();
    }

    #[test]
    fn forward_update_staleness_and_refresh() {
        let cell = cube(10.0);
        let mut ps = random_electrons(6, &cell, 17);
        let mut t = PaddedAATable::new(6, cell, UpdatePolicy::ForwardUpdate);
        t.evaluate_all(&ps).unwrap();
        let k = 4;
        let r_new = [9.0, 9.0, 9.0];
        t.stage_candidate_row(k, r_new, &ps).unwrap();
        t.accept_move(k).unwrap();
        ps.set_position(k, r_new).unwrap();
        // Row 1 slot k was deliberately left untouched (1 < k); it may hold
        // the pre-move distance.
        let (fresh, _) = cell.min_image_disp(ps.position(1), ps.position(k));
        let stale = t.dist(1, k).unwrap();
        assert!((t.dist(k, 1).unwrap() - fresh).abs() < 1e-12, "row k is current");
        // A full refresh restores exactness everywhere.
        t.evaluate_all(&ps).unwrap();
        assert!((t.dist(1, k).unwrap() - fresh).abs() < 1e-12);
        let _ = stale;
    }

    #[test]
    fn mirror_oracle_over_random_sweeps() {
        // Drive ascending sweeps with random accept/reject; after each accept
        // the rows of particles not yet moved this sweep must match a freshly
        // evaluated mirror table.
        let cell = cube(7.0);
        let mut ps = random_electrons(12, &cell, 23);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut tables = all_tables(12, cell);
        for t in &mut tables {
            t.evaluate_all(&ps).unwrap();
        }
        let mut moves = 0;
        while moves < 500 {
            for k in 0..12 {
                moves += 1;
                let r_new = [
                    rng.gen_range(0.0..7.0),
                    rng.gen_range(0.0..7.0),
                    rng.gen_range(0.0..7.0),
                ];
                let accept = rng.gen_bool(0.5);
                for t in &mut tables {
                    t.stage_candidate_row(k, r_new, &ps).unwrap();
                    if accept {
                        t.accept_move(k).unwrap();
                    } else {
                        t.reject_move();
                    }
                }
                if accept {
                    ps.set_position(k, r_new).unwrap();
                }
                let mut mirror = PackedAATable::new(12, cell);
                mirror.evaluate_all(&ps).unwrap();
                for t in &tables {
                    for fut in k + 1..12 {
                        for j in 0..=k {
                            if j == fut {
                                continue;
                            }
                            let want = mirror.dist(fut, j).unwrap();
                            let got = match t {
                                ElecElecTable::Packed(p) => p.dist(fut, j).unwrap(),
                                ElecElecTable::Padded(p) => {
                                    if p.policy() == UpdatePolicy::OnTheFly {
                                        // consumers recompute stale rows
                                        continue;
                                    }
                                    p.dist(fut, j).unwrap()
                                }
                            };
                            assert!(
                                (got - want).abs() < 1e-12,
                                "future row {fut} slot {j} after move of {k}"
                            );
                        }
                    }
                }
            }
            // End of sweep: full refresh, exactly as the drivers do before a
            // measurement.
            for t in &mut tables {
                t.evaluate_all(&ps).unwrap();
            }
        }
    }

    #[test]
    fn on_the_fly_row_fresh_recomputes() {
        let cell = cube(9.0);
        let mut ps = random_electrons(8, &cell, 31);
        let mut t = PaddedAATable::new(8, cell, UpdatePolicy::OnTheFly);
        t.evaluate_all(&ps).unwrap();
        let k = 2;
        let r_new = [8.0, 1.0, 4.5];
        t.stage_candidate_row(k, r_new, &ps).unwrap();
        t.accept_move(k).unwrap();
        ps.set_position(k, r_new).unwrap();
        assert!(t.is_stale(5));
        let (want, _) = cell.min_image_disp(ps.position(5), ps.position(k));
        let row = t.row_fresh(5, &ps).unwrap();
        assert!((row.dists[k] - want).abs() < 1e-12);
        assert!(!t.is_stale(5));
    }

    #[test]
    fn displacement_norm_equals_distance() {
        let cell = cube(6.5);
        let ps = random_electrons(20, &cell, 41);
        let mut t = PaddedAATable::new(20, cell, UpdatePolicy::ForwardUpdate);
        t.evaluate_all(&ps).unwrap();
        for i in 0..20 {
            let row = t.row(i).unwrap();
            for j in 0..20 {
                if i == j {
                    continue;
                }
                let norm = (row.disp[0][j].powi(2) + row.disp[1][j].powi(2) + row.disp[2][j].powi(2)).sqrt();
                assert!((norm - row.dists[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn storage_scalar_counts() {
        let cell = cube(10.0);
        assert_eq!(PackedAATable::<f64>::new(256, cell).storage_scalars(), 32640);
        assert_eq!(
            PaddedAATable::<f64>::new(256, cell, UpdatePolicy::OnTheFly).storage_scalars(),
            256 * 256
        );
        assert_eq!(
            PaddedAATable::<f64>::new(768, cell, UpdatePolicy::ForwardUpdate).storage_scalars(),
            768 * 768
        );
        assert_eq!(ABTable::<f64>::new(768, 64, cell).storage_scalars(), 768 * 64);
        // padding inflates the source dimension when it is not a block multiple
        assert_eq!(ABTable::<f64>::new(10, 5, cell).storage_scalars(), 10 * 16);
    }

    #[test]
    fn ab_rows_match_oracle_and_stay_current() {
        let cell = cube(11.0);
        let mut electrons = random_electrons(9, &cell, 51);
        let ions = random_electrons(5, &cell, 52);
        let mut t = ABTable::new(9, 5, cell);
        t.evaluate_all(&electrons, &ions).unwrap();
        for i in 0..9 {
            for j in 0..5 {
                let (want, _) = cell.min_image_disp(electrons.position(i), ions.position(j));
                assert!((t.dist(i, j).unwrap() - want).abs() < 1e-12);
            }
        }
        // move electron 3 and accept; only row 3 changes and it is current
        let r_new = [0.3, 10.4, 2.2];
        t.stage_candidate_row(3, r_new, &ions).unwrap();
        t.accept_move(3).unwrap();
        electrons.set_position(3, r_new).unwrap();
        for j in 0..5 {
            let (want, _) = cell.min_image_disp(electrons.position(3), ions.position(j));
            assert!((t.dist(3, j).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn single_precision_row_tolerance() {
        let cell = cube(7.0);
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let pos: Vec<[f32; 3]> = (0..24)
            .map(|_| [rng.gen_range(0.0..7.0), rng.gen_range(0.0..7.0), rng.gen_range(0.0..7.0)])
            .collect();
        let ps = ParticleSet::<f32>::electrons(pos.clone());
        let mut t = PaddedAATable::<f32>::new(24, cell, UpdatePolicy::OnTheFly);
        t.evaluate_all(&ps).unwrap();
        for i in 0..24 {
            let row = t.row(i).unwrap();
            for j in 0..24 {
                if i == j {
                    continue;
                }
                let a = [pos[i][0] as f64, pos[i][1] as f64, pos[i][2] as f64];
                let b = [pos[j][0] as f64, pos[j][1] as f64, pos[j][2] as f64];
                let (want, _) = cell.min_image_disp(a, b);
                assert!((row.dists[j] as f64 - want).abs() < 1e-5 * want.max(1.0));
            }
        }
    }
}
