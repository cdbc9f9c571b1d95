//! Per-thread compute engine.
//!
//! Binds one electron set, the shared ions, the distance tables and the
//! trial wavefunction, and drives the particle-by-particle update: drift
//! evaluation, candidate staging, ratio, accept/reject, measurement, and
//! the periodic from-scratch recompute. One engine per worker thread; the
//! only shared state is the read-only orbital table inside the blocks.

use crate::distances::{ABTable, ElecElecTable};
use crate::error::{QmcError, Result};
use crate::hamiltonian::{
    self, icosahedral_rule, random_rotation, rotate, LocalEnergyBreakdown, NonlocalPP,
};
use crate::lattice::Cell;
use crate::particles::{ParticleSet, Walker};
use crate::splines::SpoScratch;
use crate::timers::{KernelTag, KernelTimers};
use crate::vec3::{self, Vec3};
use crate::wavefunction::{TrialWaveFunction, TwoBody};
use crate::Real;
use rand::Rng;
use rand_distr::StandardNormal;
use std::sync::Arc;

/// Hamiltonian configuration for measurements.
#[derive(Debug, Clone)]
pub struct HamiltonianSpec<T: Real> {
    pub coulomb: bool,
    pub pp: Option<NonlocalPP<T>>,
}

impl<T: Real> HamiltonianSpec<T> {
    pub fn kinetic_only() -> Self {
        Self { coulomb: false, pp: None }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SweepCounts {
    pub accepted: u32,
    pub rejected: u32,
    /// Set when a near-singular update persisted through refresh + retry.
    pub flagged: bool,
}

pub struct Engine<T: Real> {
    pub cell: Cell,
    pub electrons: ParticleSet<T>,
    pub ions: Arc<ParticleSet<T>>,
    pub aa: ElecElecTable<T>,
    pub ab: ABTable<T>,
    pub psi: TrialWaveFunction<T>,
    pub timers: KernelTimers,
    vgh: SpoScratch<T>,
    values: Vec<T>,
    row_d: Vec<T>,
    row_disp: [Vec<T>; 3],
}

impl<T: Real> Engine<T> {
    pub fn new(
        cell: Cell,
        ions: Arc<ParticleSet<T>>,
        psi: TrialWaveFunction<T>,
        aa: ElecElecTable<T>,
        timers_enabled: bool,
    ) -> Self {
        let n = psi.n();
        let n_lanes = psi.det_up.spo().n_lanes().max(psi.det_dn.spo().n_lanes()).max(1);
        let electrons = ParticleSet::electrons(vec![[T::zero(); 3]; n]);
        let ab = ABTable::new(n, ions.len(), cell);
        Self {
            cell,
            electrons,
            ions,
            aa,
            ab,
            psi,
            timers: KernelTimers::new(timers_enabled),
            vgh: SpoScratch::new(n_lanes),
            values: vec![T::zero(); n_lanes],
            row_d: vec![T::zero(); n],
            row_disp: [vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n]],
        }
    }

    pub fn n_electrons(&self) -> usize {
        self.psi.n()
    }

    pub fn buffer_len(&self) -> usize {
        self.psi.buffer_len()
    }

    /// Copy a walker into the compute objects and rebuild the tables.
    pub fn load_walker(&mut self, walker: &Walker) -> Result<()> {
        self.electrons.load_positions(walker)?;
        if walker.buffer.len() != self.psi.buffer_len() {
            return Err(QmcError::SizeMismatch {
                expected: self.psi.buffer_len(),
                got: walker.buffer.len(),
            });
        }
        self.refresh_tables()?;
        self.psi.read_buffer(&walker.buffer);
        Ok(())
    }

    /// Persist compute state back into the walker.
    pub fn store_walker(&self, walker: &mut Walker) -> Result<()> {
        self.electrons.store_positions(walker)?;
        if walker.buffer.len() != self.psi.buffer_len() {
            return Err(QmcError::SizeMismatch {
                expected: self.psi.buffer_len(),
                got: walker.buffer.len(),
            });
        }
        self.psi.write_buffer(&mut walker.buffer);
        Ok(())
    }

    /// First-time setup of a walker: positions in, state from scratch, all
    /// component sections registered into the buffer.
    pub fn init_walker(&mut self, walker: &mut Walker) -> Result<()> {
        walker.buffer.resize(self.psi.buffer_len(), 0.0);
        self.electrons.load_positions(walker)?;
        self.recompute_from_scratch()?;
        self.store_walker(walker)
    }

    pub fn refresh_tables(&mut self) -> Result<()> {
        let Self { electrons, ions, aa, ab, timers, .. } = self;
        timers.time(KernelTag::DistTable, || -> Result<()> {
            aa.evaluate_all(electrons)?;
            ab.evaluate_all(electrons, ions)
        })
    }

    /// Rebuild every component in double precision from current positions;
    /// the mixed-precision recovery path and the walker-registration path.
    pub fn recompute_from_scratch(&mut self) -> Result<f64> {
        self.refresh_tables()?;
        let Self { electrons, ions, aa, ab, psi, timers, values, row_d, row_disp, .. } = self;
        let n = electrons.len();
        let j1_value = match psi.j1.as_mut() {
            Some(j1) => timers.time(KernelTag::J1, || j1.rebuild(ab, ions.len())),
            None => 0.0,
        };
        let j2_value = match &mut psi.j2 {
            TwoBody::Opt(j2) => timers.time(KernelTag::J2, || -> Result<f64> {
                for k in 0..n {
                    let (dists, disp) = committed_row(aa, k, electrons, row_d, row_disp)?;
                    j2.refresh_electron(k, dists, disp);
                }
                Ok(j2.value())
            })?,
            TwoBody::Ref(j2) => timers.time(KernelTag::J2, || -> Result<f64> {
                for k in 0..n {
                    let (dists, disp) = committed_row(aa, k, electrons, row_d, row_disp)?;
                    j2.rebuild_row(k, dists, disp);
                }
                Ok(j2.value())
            })?,
            TwoBody::None => 0.0,
        };
        psi.det_up.recompute(electrons.positions(), values)?;
        psi.det_dn.recompute(electrons.positions(), values)?;
        psi.set_log_psi(j1_value, j2_value);
        Ok(psi.log_psi())
    }

    /// Drift gradient of ln Psi for electron `k` at its current position.
    pub fn current_grad(&mut self, k: usize) -> Result<Vec3<f64>> {
        let Self { electrons, ions, aa, ab, psi, timers, vgh, row_d, row_disp, .. } = self;
        let r_k = electrons.position(k);
        let block = psi.block_for(k);
        timers.time(KernelTag::BsplineVgh, || block.spo().eval_vgh(r_k, vgh));
        let (mut grad, _) = timers.time(KernelTag::SpoVgl, || block.electron_derivs(k, vgh));
        if let Some(j1) = psi.j1.as_ref() {
            let row = ab.row(k)?;
            let sums = timers.time(KernelTag::J1, || j1.row_sums(row.dists, row.disp, ions.len()));
            grad[0] += sums.grad[0].to_f64();
            grad[1] += sums.grad[1].to_f64();
            grad[2] += sums.grad[2].to_f64();
        }
        match &psi.j2 {
            TwoBody::Opt(j2) => {
                let (dists, disp) = fresh_row(aa, k, electrons, timers, row_d, row_disp)?;
                let (g, _) = timers.time(KernelTag::J2, || j2.row_derivs(k, dists, disp));
                for d in 0..3 {
                    grad[d] += g[d];
                }
            }
            TwoBody::Ref(j2) => {
                let (g, _) = timers.time(KernelTag::J2, || j2.electron_derivs(k));
                for d in 0..3 {
                    grad[d] += g[d];
                }
            }
            TwoBody::None => {}
        }
        Ok(grad)
    }

    /// Stage candidate rows and orbital data for moving electron `k` to
    /// `r_new`, returning the move ratio and the new drift gradient.
    pub fn stage_move(&mut self, k: usize, r_new: Vec3<T>) -> Result<(f64, Vec3<f64>)> {
        let Self { electrons, ions, aa, ab, psi, timers, vgh, .. } = self;
        if let ElecElecTable::Padded(t) = aa {
            if t.is_stale(k) {
                timers.time(KernelTag::DistTable, || t.row_fresh(k, electrons))?;
            }
        }
        timers.time(KernelTag::DistTable, || -> Result<()> {
            aa.stage_candidate_row(k, r_new, electrons)?;
            ab.stage_candidate_row(k, r_new, ions)
        })?;
        timers.time(KernelTag::BsplineVgh, || psi.block_for(k).spo().eval_vgh(r_new, vgh));
        let cur_dists = match &*aa {
            ElecElecTable::Padded(t) => Some(t.row(k)?.dists),
            ElecElecTable::Packed(_) => None,
        };
        let cand_aa = aa.candidate_row();
        let cand_ab = ab.candidate_row();
        let (rho, grad) =
            psi.ratio_grad(k, &cand_aa, cur_dists, Some(&cand_ab), vgh, ions.len(), timers);
        Ok((rho, grad))
    }

    /// Ratio of a virtual (never committed) move of electron `k`, used by
    /// the nonlocal pseudopotential quadrature. Committed state is restored
    /// exactly before returning.
    pub fn virtual_ratio(&mut self, k: usize, pos: Vec3<T>) -> Result<f64> {
        let Self { electrons, ions, aa, ab, psi, timers, values, .. } = self;
        if let ElecElecTable::Padded(t) = aa {
            if t.is_stale(k) {
                timers.time(KernelTag::DistTable, || t.row_fresh(k, electrons))?;
            }
        }
        timers.time(KernelTag::DistTable, || -> Result<()> {
            aa.stage_candidate_row(k, pos, electrons)?;
            ab.stage_candidate_row(k, pos, ions)
        })?;
        timers.time(KernelTag::BsplineV, || psi.block_for(k).spo().eval_v(pos, values));
        let cur_dists = match &*aa {
            ElecElecTable::Padded(t) => Some(t.row(k)?.dists),
            ElecElecTable::Packed(_) => None,
        };
        let cand_aa = aa.candidate_row();
        let cand_ab = ab.candidate_row();
        let rho = psi.ratio(k, &cand_aa, cur_dists, Some(&cand_ab), values, ions.len(), timers);
        psi.reject_move(k);
        aa.reject_move();
        ab.reject_move();
        Ok(rho)
    }

    /// Commit the currently staged move of electron `k`.
    pub fn commit_move(&mut self, k: usize, r_new: Vec3<T>) -> Result<()> {
        match self.psi.accept_move(k, &mut self.timers) {
            Ok(()) => {}
            Err(e) => {
                self.aa.reject_move();
                self.ab.reject_move();
                return Err(e);
            }
        }
        self.timers.time(KernelTag::DistTable, || -> Result<()> {
            self.aa.accept_move(k)?;
            self.ab.accept_move(k)
        })?;
        self.electrons.set_position(k, r_new)?;
        Ok(())
    }

    /// Drop the currently staged move of electron `k`.
    pub fn discard_move(&mut self, k: usize) {
        self.psi.reject_move(k);
        self.aa.reject_move();
        self.ab.reject_move();
    }

    /// One ordered drift-diffusion sweep over all electrons.
    ///
    /// Proposal: r' = r + tau * grad + chi with chi ~ Normal(0, tau) per
    /// axis; acceptance min(1, rho^2 T(r'->r)/T(r->r')) with the Gaussian
    /// drift kernel. A near-singular determinant update triggers one
    /// refresh-and-retry of the move; a second failure flags the walker.
    pub fn sweep<R: Rng>(&mut self, tau: f64, rng: &mut R) -> Result<SweepCounts> {
        let n = self.n_electrons();
        let mut counts = SweepCounts::default();
        let sqrt_tau = tau.max(0.0).sqrt();
        for k in 0..n {
            let mut attempts = 0;
            loop {
                attempts += 1;
                let drift_old = self.current_grad(k)?;
                let r_old = vec3::to_f64(self.electrons.position(k));
                let mut chi = [0.0f64; 3];
                if tau > 0.0 {
                    for x in &mut chi {
                        let z: f64 = rng.sample(StandardNormal);
                        *x = z * sqrt_tau;
                    }
                }
                let r_new = [
                    r_old[0] + tau * drift_old[0] + chi[0],
                    r_old[1] + tau * drift_old[1] + chi[1],
                    r_old[2] + tau * drift_old[2] + chi[2],
                ];
                let r_new_t = vec3::from_f64::<T>(r_new);
                let (rho, drift_new) = self.stage_move(k, r_new_t)?;
                // Asymmetric-kernel correction: ln T(r'->r) - ln T(r->r').
                let log_t = if tau > 0.0 {
                    let mut fwd = 0.0;
                    let mut bwd = 0.0;
                    for d in 0..3 {
                        let f = r_new[d] - r_old[d] - tau * drift_old[d];
                        let b = r_old[d] - r_new[d] - tau * drift_new[d];
                        fwd += f * f;
                        bwd += b * b;
                    }
                    (fwd - bwd) / (2.0 * tau)
                } else {
                    0.0
                };
                let p_accept = (rho * rho * log_t.exp()).min(1.0);
                let u: f64 = rng.gen();
                if u < p_accept {
                    match self.commit_move(k, r_new_t) {
                        Ok(()) => {
                            counts.accepted += 1;
                            break;
                        }
                        Err(QmcError::NearSingularUpdate { .. }) if attempts == 1 => {
                            // Refresh restores a clean inverse, then the move
                            // is retried once from the drift step.
                            self.recompute_from_scratch()?;
                            continue;
                        }
                        Err(QmcError::NearSingularUpdate { .. }) => {
                            counts.flagged = true;
                            counts.rejected += 1;
                            break;
                        }
                        Err(e) => return Err(e),
                    }
                } else {
                    self.discard_move(k);
                    counts.rejected += 1;
                    break;
                }
            }
        }
        Ok(counts)
    }

    /// Fill per-electron G and L of ln Psi (after `refresh_tables`).
    pub fn evaluate_derivatives(&mut self) -> Result<()> {
        let Self { electrons, ions, aa, ab, psi, timers, vgh, row_d, row_disp, .. } = self;
        let n = electrons.len();
        for k in 0..n {
            let r_k = electrons.position(k);
            let block = psi.block_for(k);
            timers.time(KernelTag::BsplineVgh, || block.spo().eval_vgh(r_k, vgh));
            let (mut g, mut l) = timers.time(KernelTag::SpoVgl, || block.electron_derivs(k, vgh));
            if let Some(j1) = psi.j1.as_mut() {
                let (gj, lj) = timers.time(KernelTag::J1, || j1.refresh_electron(k, ab, ions.len()));
                for d in 0..3 {
                    g[d] += gj[d];
                }
                l += lj;
            }
            match &mut psi.j2 {
                TwoBody::Opt(j2) => {
                    let (dists, disp) = committed_row(aa, k, electrons, row_d, row_disp)?;
                    let (gj, lj) = timers.time(KernelTag::J2, || j2.refresh_electron(k, dists, disp));
                    for d in 0..3 {
                        g[d] += gj[d];
                    }
                    l += lj;
                }
                TwoBody::Ref(j2) => {
                    let (gj, lj) = timers.time(KernelTag::J2, || j2.electron_derivs(k));
                    for d in 0..3 {
                        g[d] += gj[d];
                    }
                    l += lj;
                }
                TwoBody::None => {}
            }
            electrons.grad[k] = g;
            electrons.lap[k] = l;
        }
        Ok(())
    }

    /// Local energy at the committed configuration: fresh tables, fresh
    /// derivatives, Coulomb sums and the pseudopotential quadrature. No
    /// committed state is mutated.
    pub fn local_energy<R: Rng>(
        &mut self,
        ham: &HamiltonianSpec<T>,
        rng: &mut R,
    ) -> Result<LocalEnergyBreakdown> {
        self.refresh_tables()?;
        self.evaluate_derivatives()?;
        let kin = hamiltonian::kinetic(&self.electrons.grad, &self.electrons.lap);
        let (ee, ei) = if ham.coulomb {
            (
                hamiltonian::coulomb_ee(&self.aa, self.electrons.len())?,
                hamiltonian::coulomb_ei(&self.ab, &self.electrons, &self.ions)?,
            )
        } else {
            (0.0, 0.0)
        };
        let nl = match &ham.pp {
            Some(pp) => self.nonlocal_pp(pp, rng)?,
            None => 0.0,
        };
        Ok(LocalEnergyBreakdown::assemble(kin, ee, ei, nl))
    }

    /// Spherical-quadrature evaluation of the nonlocal pseudopotential:
    /// for every electron within a species cutoff of an ion, ratios of
    /// virtual moves to 12 points on the sphere of the same radius.
    fn nonlocal_pp<R: Rng>(&mut self, pp: &NonlocalPP<T>, rng: &mut R) -> Result<f64> {
        let rule = icosahedral_rule();
        let n = self.electrons.len();
        let n_ion = self.ions.len();
        let mut total = 0.0;
        for i in 0..n {
            // Pull the in-range pairs out of the row first: the quadrature
            // below stages candidate rows, which reuses the table temps.
            let in_range: Vec<(usize, f64, Vec3<f64>)> = {
                let row = self.ab.row(i)?;
                (0..n_ion)
                    .filter_map(|ion| {
                        let species = self.ions.species[ion];
                        let r = row.dists[ion].to_f64();
                        if r >= pp.per_species[species].r_cut {
                            return None;
                        }
                        let unit_ie = [
                            -row.disp[0][ion].to_f64() / r,
                            -row.disp[1][ion].to_f64() / r,
                            -row.disp[2][ion].to_f64() / r,
                        ];
                        Some((ion, r, unit_ie))
                    })
                    .collect()
            };
            for (ion, r, unit_ie) in in_range {
                let species = self.ions.species[ion];
                let channels = &pp.per_species[species];
                let (v0, v1) = self.timers.time(KernelTag::Nlpp, || {
                    (
                        channels.v_l[0].eval(T::from_f64(r)).to_f64(),
                        channels.v_l[1].eval(T::from_f64(r)).to_f64(),
                    )
                });
                if v0 == 0.0 && v1 == 0.0 {
                    continue;
                }
                let rot = self.timers.time(KernelTag::Nlpp, || random_rotation(rng));
                let ion_pos = vec3::to_f64(self.ions.position(ion));
                let mut moment0 = 0.0;
                let mut moment1 = 0.0;
                for dir in rule {
                    let dir = rotate(&rot, dir);
                    let pos = [
                        ion_pos[0] + r * dir[0],
                        ion_pos[1] + r * dir[1],
                        ion_pos[2] + r * dir[2],
                    ];
                    let rho = self.virtual_ratio(i, vec3::from_f64::<T>(pos))?;
                    let cos_theta = vec3::dot(unit_ie, dir);
                    moment0 += rho;
                    moment1 += cos_theta * rho;
                }
                // Equal weights 1/12; (2l+1) prefactors for l = 0, 1.
                total += v0 * moment0 / 12.0 + 3.0 * v1 * moment1 / 12.0;
            }
        }
        Ok(total)
    }
}

/// Committed row k (fresh by construction after `evaluate_all`); gathers
/// from the packed triangle through scratch buffers when needed.
fn committed_row<'a, T: Real>(
    aa: &'a ElecElecTable<T>,
    k: usize,
    _electrons: &ParticleSet<T>,
    row_d: &'a mut Vec<T>,
    row_disp: &'a mut [Vec<T>; 3],
) -> Result<(&'a [T], [&'a [T]; 3])> {
    match aa {
        ElecElecTable::Padded(t) => {
            let row = t.row(k)?;
            Ok((row.dists, row.disp))
        }
        ElecElecTable::Packed(t) => {
            t.gather_row(k, row_d, row_disp)?;
            Ok((&row_d[..], [&row_disp[0][..], &row_disp[1][..], &row_disp[2][..]]))
        }
    }
}

/// Row k recomputed from current positions when the policy allows staleness.
fn fresh_row<'a, T: Real>(
    aa: &'a mut ElecElecTable<T>,
    k: usize,
    electrons: &ParticleSet<T>,
    timers: &mut KernelTimers,
    row_d: &'a mut Vec<T>,
    row_disp: &'a mut [Vec<T>; 3],
) -> Result<(&'a [T], [&'a [T]; 3])> {
    match aa {
        ElecElecTable::Padded(t) => {
            let row = timers.time(KernelTag::DistTable, || t.row_fresh(k, electrons))?;
            Ok((row.dists, row.disp))
        }
        ElecElecTable::Packed(t) => {
            timers.time(KernelTag::DistTable, || t.gather_row(k, row_d, row_disp))?;
            Ok((&row_d[..], [&row_disp[0][..], &row_disp[1][..], &row_disp[2][..]]))
        }
    }
}
