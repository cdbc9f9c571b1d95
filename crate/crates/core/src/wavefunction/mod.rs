//! Slater-Jastrow trial wavefunction.
//!
//! Composes the one-body Jastrow, a two-body Jastrow in either storage
//! scheme, and two spin-block determinants. A particle move factorizes into
//! per-component log-value changes (the Jastrow difference sums and the
//! determinant-lemma ratio); acceptance applies per-component incremental
//! updates and accumulates log Psi.

mod jastrow1;
mod jastrow2;
mod slater;

pub use jastrow1::{OneBodyJastrow, RadialSums};
pub use jastrow2::{SpinChannels, TwoBodyJastrowOpt, TwoBodyJastrowRef};
pub use slater::{SlaterDetBlock, NEAR_SINGULAR_RATIO};

use crate::distances::CandidateRow;
use crate::error::{QmcError, Result};
use crate::splines::SpoScratch;
use crate::timers::{KernelTag, KernelTimers};
use crate::vec3::Vec3;
use crate::Real;

/// Two-body Jastrow storage scheme selection.
#[derive(Debug, Clone)]
pub enum TwoBody<T: Real> {
    Ref(TwoBodyJastrowRef<T>),
    Opt(TwoBodyJastrowOpt<T>),
    None,
}

#[derive(Debug, Clone, Copy)]
struct StagedMove {
    k: usize,
    log_jastrow_ratio: f64,
    det_ratio: f64,
}

/// Composite trial wavefunction state for one worker thread.
#[derive(Debug, Clone)]
pub struct TrialWaveFunction<T: Real> {
    n: usize,
    n_up: usize,
    pub j1: Option<OneBodyJastrow<T>>,
    pub j2: TwoBody<T>,
    pub det_up: SlaterDetBlock<T>,
    pub det_dn: SlaterDetBlock<T>,
    log_psi: f64,
    sign: f64,
    staged: Option<StagedMove>,
}

impl<T: Real> TrialWaveFunction<T> {
    pub fn new(
        n_up: usize,
        n_dn: usize,
        j1: Option<OneBodyJastrow<T>>,
        j2: TwoBody<T>,
        det_up: SlaterDetBlock<T>,
        det_dn: SlaterDetBlock<T>,
    ) -> Self {
        debug_assert_eq!(det_up.offset(), 0);
        debug_assert_eq!(det_up.n_half(), n_up);
        debug_assert_eq!(det_dn.offset(), n_up);
        debug_assert_eq!(det_dn.n_half(), n_dn);
        Self {
            n: n_up + n_dn,
            n_up,
            j1,
            j2,
            det_up,
            det_dn,
            log_psi: 0.0,
            sign: 1.0,
            staged: None,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_up(&self) -> usize {
        self.n_up
    }

    pub fn log_psi(&self) -> f64 {
        self.log_psi
    }

    pub fn sign(&self) -> f64 {
        self.sign
    }

    #[inline]
    pub fn block_for(&self, k: usize) -> &SlaterDetBlock<T> {
        if k < self.n_up {
            &self.det_up
        } else {
            &self.det_dn
        }
    }

    #[inline]
    fn block_for_mut(&mut self, k: usize) -> &mut SlaterDetBlock<T> {
        if k < self.n_up {
            &mut self.det_up
        } else {
            &mut self.det_dn
        }
    }

    /// Move ratio Psi(R') / Psi(R) for electron `k`, staging all component
    /// updates. `cur_aa_dists` is the freshly computed current row required
    /// by the compute-on-the-fly two-body scheme.
    #[allow(clippy::too_many_arguments)]
    pub fn ratio(
        &mut self,
        k: usize,
        cand_aa: &CandidateRow<'_, T>,
        cur_aa_dists: Option<&[T]>,
        cand_ab: Option<&CandidateRow<'_, T>>,
        cand_spo_values: &[T],
        n_ion: usize,
        timers: &mut KernelTimers,
    ) -> f64 {
        let mut log_j = 0.0;
        if let Some(j1) = self.j1.as_mut() {
            let cand = cand_ab.expect("one-body term needs a staged ion row");
            log_j += timers.time(KernelTag::J1, || j1.stage_move(k, cand, n_ion));
        }
        match &mut self.j2 {
            TwoBody::Ref(j2) => {
                log_j += timers.time(KernelTag::J2, || j2.stage_move(k, cand_aa));
            }
            TwoBody::Opt(j2) => {
                let cur = cur_aa_dists.expect("on-the-fly two-body term needs the current row");
                log_j += timers.time(KernelTag::J2, || j2.stage_move(k, cand_aa, cur));
            }
            TwoBody::None => {}
        }
        let det_ratio = timers.time(KernelTag::DetUpdate, || {
            self.block_for_mut(k).stage_ratio(k, cand_spo_values)
        });
        self.staged = Some(StagedMove { k, log_jastrow_ratio: log_j, det_ratio });
        log_j.exp() * det_ratio
    }

    /// Move ratio plus the gradient of ln Psi at the candidate position.
    #[allow(clippy::too_many_arguments)]
    pub fn ratio_grad(
        &mut self,
        k: usize,
        cand_aa: &CandidateRow<'_, T>,
        cur_aa_dists: Option<&[T]>,
        cand_ab: Option<&CandidateRow<'_, T>>,
        cand_spo: &SpoScratch<T>,
        n_ion: usize,
        timers: &mut KernelTimers,
    ) -> (f64, Vec3<f64>) {
        let rho = self.ratio(k, cand_aa, cur_aa_dists, cand_ab, &cand_spo.v, n_ion, timers);
        let mut grad = [0.0f64; 3];
        if let Some(j1) = self.j1.as_ref() {
            let g = j1.staged_grad();
            for d in 0..3 {
                grad[d] += g[d];
            }
        }
        match &self.j2 {
            TwoBody::Ref(j2) => {
                let g = j2.staged_grad();
                for d in 0..3 {
                    grad[d] += g[d];
                }
            }
            TwoBody::Opt(j2) => {
                let g = j2.staged_grad();
                for d in 0..3 {
                    grad[d] += g[d];
                }
            }
            TwoBody::None => {}
        }
        let det_g = timers.time(KernelTag::SpoVgl, || self.block_for(k).staged_grad(cand_spo));
        for d in 0..3 {
            grad[d] += det_g[d];
        }
        (rho, grad)
    }

    /// Commit the staged move of electron `k` into every component and
    /// accumulate log Psi. Near-singular determinant updates surface as
    /// errors with all staged state dropped.
    pub fn accept_move(&mut self, k: usize, timers: &mut KernelTimers) -> Result<()> {
        let staged = self
            .staged
            .take()
            .ok_or_else(|| QmcError::Logic(format!("accept_move({k}) without staged move")))?;
        debug_assert_eq!(staged.k, k);
        match timers.time(KernelTag::DetUpdate, || self.block_for_mut(k).accept_move(k)) {
            Ok(()) => {}
            Err(e) => {
                self.reject_components(k);
                return Err(e);
            }
        }
        if let Some(j1) = self.j1.as_mut() {
            j1.accept_move(k);
        }
        match &mut self.j2 {
            TwoBody::Ref(j2) => timers.time(KernelTag::J2, || j2.accept_move(k)),
            TwoBody::Opt(j2) => j2.accept_move(k),
            TwoBody::None => {}
        }
        self.log_psi += staged.log_jastrow_ratio + staged.det_ratio.abs().ln();
        if staged.det_ratio < 0.0 {
            self.sign = -self.sign;
        }
        Ok(())
    }

    fn reject_components(&mut self, k: usize) {
        if let Some(j1) = self.j1.as_mut() {
            j1.reject_move();
        }
        match &mut self.j2 {
            TwoBody::Ref(j2) => j2.reject_move(),
            TwoBody::Opt(j2) => j2.reject_move(),
            TwoBody::None => {}
        }
        self.block_for_mut(k).reject_move();
    }

    /// Drop all staged state; committed state is untouched.
    pub fn reject_move(&mut self, k: usize) {
        self.reject_components(k);
        self.staged = None;
    }

    /// Set log Psi from freshly rebuilt component values.
    pub fn set_log_psi(&mut self, j1_value: f64, j2_value: f64) {
        self.log_psi = j1_value
            + j2_value
            + self.det_up.log_abs_det()
            + self.det_dn.log_abs_det();
        self.sign = self.det_up.sign() * self.det_dn.sign();
    }

    /// Recompute log Psi from current component state (used after restoring
    /// a walker buffer).
    pub fn refresh_log_psi(&mut self) {
        let j1_value = self.j1.as_ref().map_or(0.0, |j| j.value());
        let j2_value = match &self.j2 {
            TwoBody::Ref(j2) => j2.value(),
            TwoBody::Opt(j2) => j2.value(),
            TwoBody::None => 0.0,
        };
        self.set_log_psi(j1_value, j2_value);
    }

    /// Buffer section lengths in registration order (J1, J2, up, down).
    pub fn buffer_len(&self) -> usize {
        let mut len = 0;
        if let Some(j1) = self.j1.as_ref() {
            len += j1.buffer_len();
        }
        len += match &self.j2 {
            TwoBody::Ref(j2) => j2.buffer_len(),
            TwoBody::Opt(j2) => j2.buffer_len(),
            TwoBody::None => 0,
        };
        len + self.det_up.buffer_len() + self.det_dn.buffer_len()
    }

    pub fn write_buffer(&self, out: &mut [f64]) {
        let mut at = 0;
        if let Some(j1) = self.j1.as_ref() {
            j1.write_buffer(&mut out[at..at + j1.buffer_len()]);
            at += j1.buffer_len();
        }
        match &self.j2 {
            TwoBody::Ref(j2) => {
                j2.write_buffer(&mut out[at..at + j2.buffer_len()]);
                at += j2.buffer_len();
            }
            TwoBody::Opt(j2) => {
                j2.write_buffer(&mut out[at..at + j2.buffer_len()]);
                at += j2.buffer_len();
            }
            TwoBody::None => {}
        }
        self.det_up.write_buffer(&mut out[at..at + self.det_up.buffer_len()]);
        at += self.det_up.buffer_len();
        self.det_dn.write_buffer(&mut out[at..at + self.det_dn.buffer_len()]);
    }

    pub fn read_buffer(&mut self, input: &[f64]) {
        let mut at = 0;
        if let Some(j1) = self.j1.as_mut() {
            let len = j1.buffer_len();
            j1.read_buffer(&input[at..at + len]);
            at += len;
        }
        match &mut self.j2 {
            TwoBody::Ref(j2) => {
                let len = j2.buffer_len();
                j2.read_buffer(&input[at..at + len]);
                at += len;
            }
            TwoBody::Opt(j2) => {
                let len = j2.buffer_len();
                j2.read_buffer(&input[at..at + len]);
                at += len;
            }
            TwoBody::None => {}
        }
        let len = self.det_up.buffer_len();
        self.det_up.read_buffer(&input[at..at + len]);
        at += len;
        let len = self.det_dn.buffer_len();
        self.det_dn.read_buffer(&input[at..at + len]);
        self.staged = None;
        self.refresh_log_psi();
    }

    /// Per-walker scalar counts by component, for memory accounting.
    pub fn storage_breakdown(&self) -> Vec<(&'static str, usize)> {
        let mut out = Vec::new();
        if let Some(j1) = self.j1.as_ref() {
            out.push(("J1", j1.storage_scalars()));
        }
        match &self.j2 {
            TwoBody::Ref(j2) => out.push(("J2", j2.storage_scalars())),
            TwoBody::Opt(j2) => out.push(("J2", j2.storage_scalars())),
            TwoBody::None => {}
        }
        out.push(("DetUp", self.det_up.storage_scalars()));
        out.push(("DetDown", self.det_dn.storage_scalars()));
        out
    }
}
