//! VMC and DMC drivers: threaded walker crowds, branching population
//! control, trial-energy feedback, and run statistics.
//!
//! Parallel layout: the walker vector is split into contiguous crowds, one
//! per worker thread, each thread owning one compute engine. The only
//! synchronization point is the single-threaded section between measurement
//! and the next generation (branching, trial-energy update, rebalancing).
//! Per-walker counter-based RNG streams make results independent of the
//! thread count.

use crate::engine::{Engine, HamiltonianSpec};
use crate::error::{QmcError, Result};
use crate::particles::Walker;
use crate::presets::SystemBuild;
use crate::rng::{stream, StreamPurpose};
use crate::stats::{EnergyAccumulator, PopulationStats};
use crate::timers::KernelTimers;
use crate::Real;
use rand::Rng;
use serde::Serialize;
use std::io::{Read, Write};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Packed distance storage, store-everything two-body Jastrow.
    Ref,
    /// Padded on-the-fly distance rows, O(N) two-body Jastrow.
    Opt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    Double,
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DriverKind {
    Vmc,
    Dmc,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunParams {
    pub tau: f64,
    pub steps: usize,
    pub target_pop: usize,
    pub n_threads: usize,
    /// Sweeps between from-scratch recomputes of per-walker state.
    pub refresh_period: u32,
    pub precision: Precision,
    pub variant: Variant,
    pub seed: u64,
    pub driver: DriverKind,
    #[serde(skip)]
    pub timers_enabled: bool,
}

impl RunParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau >= 0.0) {
            return Err(QmcError::InvalidArgument(format!("tau must be >= 0, got {}", self.tau)));
        }
        if self.n_threads == 0 {
            return Err(QmcError::InvalidArgument("need at least one thread".into()));
        }
        if self.target_pop < self.n_threads {
            return Err(QmcError::InvalidArgument(format!(
                "target population {} below thread count {}",
                self.target_pop, self.n_threads
            )));
        }
        Ok(())
    }

    /// Default refresh cadence: tighter in mixed precision.
    pub fn default_refresh(precision: Precision) -> u32 {
        match precision {
            Precision::Mixed => 16,
            Precision::Double => 64,
        }
    }
}

/// Everything a run produces besides the report formatting.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub stats: PopulationStats,
    pub timers: KernelTimers,
    pub acceptance_ratio: f64,
    /// log |Psi| of walker 0 after the final generation (checksum).
    pub final_logpsi: f64,
    pub final_population: usize,
}

/// Contiguous crowd sizes: as even as possible, differing by at most one.
pub fn load_balance(n_walkers: usize, n_threads: usize) -> Vec<usize> {
    let base = n_walkers / n_threads;
    let rem = n_walkers % n_threads;
    (0..n_threads).map(|t| base + usize::from(t < rem)).collect()
}

/// Symmetrized branching weight update followed by stochastic-rounding
/// cloning. Clones carry weight w/m; the multiplicity field resets to one.
/// Population is clamped to [target/2, 2*target].
pub fn branch_and_reweight(
    walkers: &mut Vec<Walker>,
    tau: f64,
    e_trial: f64,
    target: usize,
    seed: u64,
    step: u64,
    next_rng_id: &mut u64,
) -> usize {
    for w in walkers.iter_mut() {
        let growth = -tau * (0.5 * (w.e_local + w.e_local_prev) - e_trial);
        w.weight *= growth.exp();
    }
    let mut out: Vec<Walker> = Vec::with_capacity(walkers.len() + 8);
    for w in walkers.drain(..) {
        let u: f64 = stream(seed, w.rng_id, step, StreamPurpose::Branch).gen();
        let mult = (w.weight + u).floor().max(0.0) as u32;
        if mult == 0 || w.flagged {
            continue;
        }
        let share = w.weight / mult as f64;
        for copy in 0..mult {
            let mut c = w.clone();
            c.weight = share;
            c.multiplicity = 1;
            if copy > 0 {
                c.rng_id = *next_rng_id;
                *next_rng_id += 1;
            }
            out.push(c);
        }
    }
    let mut warnings = 0;
    let max_pop = 2 * target;
    let min_pop = target.div_ceil(2);
    if out.len() > max_pop {
        out.truncate(max_pop);
        warnings += 1;
    }
    if out.len() < min_pop && !out.is_empty() {
        warnings += 1;
        let mut i = 0;
        while out.len() < min_pop {
            let mut c = out[i % out.len()].clone();
            c.rng_id = *next_rng_id;
            *next_rng_id += 1;
            out.push(c);
            i += 1;
        }
    }
    *walkers = out;
    warnings
}

/// Trial-energy feedback: E_T = mean(E_L) - ln(N_w / target) / tau.
pub fn update_trial_energy(e_mean: f64, tau: f64, population: usize, target: usize) -> f64 {
    if tau > 0.0 && population > 0 {
        e_mean - (population as f64 / target as f64).ln() / tau
    } else {
        e_mean
    }
}

/// Run the configured driver over the system.
pub fn run(params: &RunParams, system: &SystemBuild) -> Result<RunOutput> {
    params.validate()?;
    match params.precision {
        Precision::Double => run_typed::<f64>(params, system),
        Precision::Mixed => run_typed::<f32>(params, system),
    }
}

fn run_typed<T: Real>(params: &RunParams, system: &SystemBuild) -> Result<RunOutput> {
    let ham: HamiltonianSpec<T> = system.hamiltonian();
    let mut engines: Vec<Engine<T>> = (0..params.n_threads)
        .map(|_| system.engine(params.variant, params.timers_enabled))
        .collect::<Result<_>>()?;

    // Initial population: seeded positions, registered buffers, measured
    // starting energies.
    let mut walkers: Vec<Walker> = Vec::with_capacity(params.target_pop);
    for id in 0..params.target_pop as u64 {
        let pos = system.initial_positions(id);
        let mut w = Walker::new(pos, engines[0].buffer_len(), id);
        engines[0].init_walker(&mut w)?;
        let mut rng = stream(params.seed, id, 0, StreamPurpose::Measure);
        let e = engines[0].local_energy(&ham, &mut rng)?;
        w.e_local = e.total;
        w.e_local_prev = e.total;
        engines[0].store_walker(&mut w)?;
        walkers.push(w);
    }
    let mut next_rng_id = params.target_pop as u64;

    let mut acc = EnergyAccumulator::default();
    let mut e_trial = {
        let mut init = EnergyAccumulator::default();
        for w in &walkers {
            init.add(w.e_local, w.weight);
        }
        init.mean()
    };
    let mut e_trial_series = Vec::with_capacity(params.steps);
    let mut e_step_means = Vec::with_capacity(params.steps);
    let mut pop_series = Vec::with_capacity(params.steps);
    let mut pop_sum = 0.0f64;
    let mut accepted = 0u64;
    let mut rejected = 0u64;
    let mut clamp_warnings = 0usize;
    let mut flagged = 0usize;

    let t_start = Instant::now();
    for step in 1..=params.steps as u64 {
        let crowds = load_balance(walkers.len(), params.n_threads);
        let seed = params.seed;
        let tau = params.tau;
        let refresh = params.refresh_period;
        let results: Vec<Result<(u64, u64)>> = std::thread::scope(|scope| {
            let mut handles = Vec::with_capacity(params.n_threads);
            let mut rest: &mut [Walker] = &mut walkers;
            for (crowd_len, engine) in crowds.iter().zip(engines.iter_mut()) {
                let (chunk, tail) = rest.split_at_mut(*crowd_len);
                rest = tail;
                let ham = &ham;
                handles.push(scope.spawn(move || {
                    let mut local_acc = 0u64;
                    let mut local_rej = 0u64;
                    for w in chunk.iter_mut() {
                        if w.flagged {
                            continue;
                        }
                        engine.load_walker(w)?;
                        let mut sweep_rng = stream(seed, w.rng_id, step, StreamPurpose::Sweep);
                        let counts = engine.sweep(tau, &mut sweep_rng)?;
                        local_acc += u64::from(counts.accepted);
                        local_rej += u64::from(counts.rejected);
                        if counts.flagged {
                            w.flagged = true;
                            w.weight = 0.0;
                            engine.store_walker(w)?;
                            continue;
                        }
                        w.age = if counts.accepted == 0 { w.age + 1 } else { 0 };
                        w.sweeps_since_refresh += 1;
                        if w.sweeps_since_refresh >= refresh {
                            engine.recompute_from_scratch()?;
                            w.sweeps_since_refresh = 0;
                        }
                        let mut meas_rng = stream(seed, w.rng_id, step, StreamPurpose::Measure);
                        let e = engine.local_energy(ham, &mut meas_rng)?;
                        w.e_local_prev = w.e_local;
                        w.e_local = e.total;
                        engine.store_walker(w)?;
                    }
                    Ok((local_acc, local_rej))
                }));
            }
            handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
        });
        for r in results {
            let (a, rj) = r?;
            accepted += a;
            rejected += rj;
        }

        // Ordered reduction over the walker vector keeps statistics bitwise
        // independent of the crowd split.
        let mut step_acc = EnergyAccumulator::default();
        for w in walkers.iter().filter(|w| !w.flagged) {
            step_acc.add(w.e_local, w.weight);
            acc.add(w.e_local, w.weight);
        }
        flagged += walkers.iter().filter(|w| w.flagged).count();
        let step_mean = step_acc.mean();
        e_step_means.push(step_mean);

        if params.driver == DriverKind::Dmc {
            clamp_warnings += branch_and_reweight(
                &mut walkers,
                params.tau,
                e_trial,
                params.target_pop,
                params.seed,
                step,
                &mut next_rng_id,
            );
            if walkers.is_empty() {
                return Err(QmcError::Logic("population collapsed to zero".into()));
            }
            e_trial = update_trial_energy(step_mean, params.tau, walkers.len(), params.target_pop);
        } else {
            e_trial = step_mean;
        }
        e_trial_series.push(e_trial);
        pop_series.push(walkers.len());
        pop_sum += walkers.len() as f64;
    }
    let t_mc = t_start.elapsed().as_secs_f64();

    let mut timers = KernelTimers::new(params.timers_enabled);
    for e in &engines {
        timers.merge(&e.timers);
    }
    timers.set_other_from_total(t_mc);

    let final_logpsi = if let Some(w0) = walkers.first() {
        engines[0].load_walker(w0)?;
        engines[0].psi.log_psi()
    } else {
        0.0
    };

    let avg_pop = if params.steps > 0 { pop_sum / params.steps as f64 } else { walkers.len() as f64 };
    let stats = PopulationStats::finalize(
        e_trial_series,
        e_step_means,
        &acc,
        avg_pop,
        pop_series,
        t_mc,
        clamp_warnings,
        flagged,
    );
    let moves = accepted + rejected;
    Ok(RunOutput {
        stats,
        timers,
        acceptance_ratio: if moves > 0 { accepted as f64 / moves as f64 } else { 0.0 },
        final_logpsi,
        final_population: walkers.len(),
    })
}

const POP_MAGIC: &[u8; 8] = b"QMCKPOP1";

/// Checkpoint: full population dump in the walker serialization format plus
/// the RNG stream counters.
pub fn save_population<W: Write>(
    out: &mut W,
    walkers: &[Walker],
    seed: u64,
    step: u64,
    next_rng_id: u64,
) -> Result<()> {
    out.write_all(POP_MAGIC)?;
    out.write_all(&(walkers.len() as u64).to_le_bytes())?;
    out.write_all(&seed.to_le_bytes())?;
    out.write_all(&step.to_le_bytes())?;
    out.write_all(&next_rng_id.to_le_bytes())?;
    for w in walkers {
        out.write_all(&w.rng_id.to_le_bytes())?;
        w.write_to(out)?;
    }
    Ok(())
}

pub struct PopulationCheckpoint {
    pub walkers: Vec<Walker>,
    pub seed: u64,
    pub step: u64,
    pub next_rng_id: u64,
}

pub fn load_population<R: Read>(input: &mut R) -> Result<PopulationCheckpoint> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != POP_MAGIC {
        return Err(QmcError::Format("bad population checkpoint magic".into()));
    }
    let mut buf = [0u8; 8];
    input.read_exact(&mut buf)?;
    let n = u64::from_le_bytes(buf) as usize;
    input.read_exact(&mut buf)?;
    let seed = u64::from_le_bytes(buf);
    input.read_exact(&mut buf)?;
    let step = u64::from_le_bytes(buf);
    input.read_exact(&mut buf)?;
    let next_rng_id = u64::from_le_bytes(buf);
    let mut walkers = Vec::with_capacity(n);
    for _ in 0..n {
        input.read_exact(&mut buf)?;
        let rng_id = u64::from_le_bytes(buf);
        let mut w = Walker::read_from(input)?;
        w.rng_id = rng_id;
        walkers.push(w);
    }
    Ok(PopulationCheckpoint { walkers, seed, step, next_rng_id })
}
