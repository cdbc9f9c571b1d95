//! Isolated kernel benchmarks mimicking the particle-by-particle access
//! pattern: ordered staging of candidate rows, stochastic acceptance, and a
//! full table evaluation at each sweep boundary. Shared by the CLI miniapp
//! subcommands and the acceptance suite.

use crate::distances::{ElecElecTable, UpdatePolicy};
use crate::drivers::Variant;
use crate::error::Result;
use crate::lattice::Cell;
use crate::particles::ParticleSet;
use crate::rng::{stream, StreamPurpose};
use crate::splines::{SpoScratch, SpoSet};
use crate::vec3::Vec3;
use crate::wavefunction::{SpinChannels, TwoBodyJastrowOpt, TwoBodyJastrowRef};
use crate::Real;
use rand::Rng;
use std::time::Instant;

#[derive(Debug, Clone, Copy)]
pub struct KernelBenchResult {
    pub seconds: f64,
    pub moves: u64,
    pub checksum: f64,
    /// Moves per second.
    pub throughput: f64,
}

fn random_cell_positions<T: Real>(n: usize, cell: &Cell, seed: u64) -> Vec<Vec3<T>> {
    let mut rng = stream(seed, 0xBE, 0, StreamPurpose::Init);
    (0..n)
        .map(|_| {
            [
                T::from_f64(rng.gen_range(0.0..cell.lengths[0])),
                T::from_f64(rng.gen_range(0.0..cell.lengths[1])),
                T::from_f64(rng.gen_range(0.0..cell.lengths[2])),
            ]
        })
        .collect()
}

fn aa_table<T: Real>(n: usize, cell: Cell, variant: Variant) -> ElecElecTable<T> {
    match variant {
        Variant::Ref => ElecElecTable::packed(n, cell),
        Variant::Opt => ElecElecTable::padded(n, cell, UpdatePolicy::OnTheFly),
    }
}

/// Distance-table kernel: stage + accept/reject over ordered sweeps, full
/// refresh at sweep boundaries. The checksum is the sum of all pair
/// distances after a final full evaluation, identical across variants.
pub fn bench_disttable<T: Real>(
    n: usize,
    variant: Variant,
    sweeps: usize,
    seed: u64,
) -> Result<KernelBenchResult> {
    let cell = Cell::periodic([(n as f64).cbrt() * 1.6; 3])?;
    let mut electrons = ParticleSet::electrons(random_cell_positions::<T>(n, &cell, seed));
    let mut table = aa_table::<T>(n, cell, variant);
    let mut rng = stream(seed, 0xD1, 1, StreamPurpose::Sweep);
    let start = Instant::now();
    table.evaluate_all(&electrons)?;
    let mut moves = 0u64;
    for _ in 0..sweeps {
        for k in 0..n {
            let r_k = electrons.position(k);
            let r_new = [
                r_k[0] + T::from_f64(rng.gen_range(-0.4..0.4)),
                r_k[1] + T::from_f64(rng.gen_range(-0.4..0.4)),
                r_k[2] + T::from_f64(rng.gen_range(-0.4..0.4)),
            ];
            if let ElecElecTable::Padded(t) = &mut table {
                if t.is_stale(k) {
                    t.row_fresh(k, &electrons)?;
                }
            }
            table.stage_candidate_row(k, r_new, &electrons)?;
            moves += 1;
            if rng.gen_bool(0.5) {
                table.accept_move(k)?;
                electrons.set_position(k, r_new)?;
            } else {
                table.reject_move();
            }
        }
        table.evaluate_all(&electrons)?;
    }
    let mut checksum = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            checksum += table.dist(i, j)?.to_f64();
        }
    }
    let seconds = start.elapsed().as_secs_f64();
    Ok(KernelBenchResult { seconds, moves, checksum, throughput: moves as f64 / seconds.max(1e-12) })
}

/// Two-body Jastrow kernel over the same move pattern: per-move log-value
/// difference plus acceptance updates. Checksum is the running sum of the
/// accepted log-ratio contributions plus the final component value.
pub fn bench_jastrow<T: Real>(
    n: usize,
    variant: Variant,
    sweeps: usize,
    seed: u64,
) -> Result<KernelBenchResult> {
    let cell = Cell::periodic([(n as f64).cbrt() * 1.6; 3])?;
    let n_up = n / 2;
    let channels = SpinChannels::<T> {
        like: crate::splines::CubicBspline1D::fit(
            |r| -0.25 * (1.0 - r / 3.0).powi(3),
            3.0,
            16,
        )?,
        unlike: crate::splines::CubicBspline1D::fit(
            |r| -0.4 * (1.0 - r / 3.5).powi(3),
            3.5,
            16,
        )?,
    };
    let mut electrons = ParticleSet::electrons(random_cell_positions::<T>(n, &cell, seed));
    let mut table = aa_table::<T>(n, cell, variant);
    let mut j_ref = TwoBodyJastrowRef::new(channels.clone(), n, n_up);
    let mut j_opt = TwoBodyJastrowOpt::new(channels, n, n_up);
    let mut row_d = vec![T::zero(); n];
    let mut row_disp = [vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n]];
    let mut rng = stream(seed, 0x12, 1, StreamPurpose::Sweep);

    let start = Instant::now();
    table.evaluate_all(&electrons)?;
    rebuild_j2(&mut table, &electrons, variant, &mut j_ref, &mut j_opt, &mut row_d, &mut row_disp)?;
    let mut moves = 0u64;
    let mut checksum = 0.0f64;
    for _ in 0..sweeps {
        for k in 0..n {
            let r_k = electrons.position(k);
            let r_new = [
                r_k[0] + T::from_f64(rng.gen_range(-0.4..0.4)),
                r_k[1] + T::from_f64(rng.gen_range(-0.4..0.4)),
                r_k[2] + T::from_f64(rng.gen_range(-0.4..0.4)),
            ];
            if let ElecElecTable::Padded(t) = &mut table {
                if t.is_stale(k) {
                    t.row_fresh(k, &electrons)?;
                }
            }
            table.stage_candidate_row(k, r_new, &electrons)?;
            let delta = match (&mut table, variant) {
                (table, Variant::Ref) => {
                    let cand = table.candidate_row();
                    j_ref.stage_move(k, &cand)
                }
                (ElecElecTable::Padded(t), Variant::Opt) => {
                    let cur: Vec<T> = t.row(k)?.dists.to_vec();
                    let cand = t.candidate_row();
                    j_opt.stage_move(k, &cand, &cur)
                }
                _ => unreachable!("opt uses the padded table"),
            };
            moves += 1;
            if rng.gen_bool(0.5) {
                checksum += delta;
                match variant {
                    Variant::Ref => j_ref.accept_move(k),
                    Variant::Opt => j_opt.accept_move(k),
                }
                table.accept_move(k)?;
                electrons.set_position(k, r_new)?;
            } else {
                match variant {
                    Variant::Ref => j_ref.reject_move(),
                    Variant::Opt => j_opt.reject_move(),
                }
                table.reject_move();
            }
        }
        table.evaluate_all(&electrons)?;
        rebuild_j2(&mut table, &electrons, variant, &mut j_ref, &mut j_opt, &mut row_d, &mut row_disp)?;
    }
    let value = match variant {
        Variant::Ref => j_ref.value(),
        Variant::Opt => j_opt.value(),
    };
    checksum += value;
    let seconds = start.elapsed().as_secs_f64();
    Ok(KernelBenchResult { seconds, moves, checksum, throughput: moves as f64 / seconds.max(1e-12) })
}

#[allow(clippy::too_many_arguments)]
fn rebuild_j2<T: Real>(
    table: &mut ElecElecTable<T>,
    electrons: &ParticleSet<T>,
    variant: Variant,
    j_ref: &mut TwoBodyJastrowRef<T>,
    j_opt: &mut TwoBodyJastrowOpt<T>,
    row_d: &mut Vec<T>,
    row_disp: &mut [Vec<T>; 3],
) -> Result<()> {
    let n = electrons.len();
    for k in 0..n {
        match (table as &ElecElecTable<T>, variant) {
            (ElecElecTable::Padded(t), Variant::Opt) => {
                let row = t.row(k)?;
                j_opt.refresh_electron(k, row.dists, row.disp);
            }
            (ElecElecTable::Packed(t), Variant::Ref) => {
                t.gather_row(k, row_d, row_disp)?;
                j_ref.rebuild_row(k, row_d, [&row_disp[0], &row_disp[1], &row_disp[2]]);
            }
            (ElecElecTable::Padded(t), Variant::Ref) => {
                let row = t.row(k)?;
                j_ref.rebuild_row(k, row.dists, row.disp);
            }
            _ => unreachable!("opt uses the padded table"),
        }
    }
    Ok(())
}

/// Orbital kernels over random positions: value-only and vgh evaluations.
pub fn bench_spo<T: Real>(
    set: &dyn SpoSet<T>,
    cell: &Cell,
    evals: usize,
    seed: u64,
) -> (KernelBenchResult, KernelBenchResult) {
    let mut rng = stream(seed, 0x5B, 1, StreamPurpose::Sweep);
    let positions: Vec<Vec3<T>> = (0..evals)
        .map(|_| {
            [
                T::from_f64(rng.gen_range(0.0..cell.lengths[0])),
                T::from_f64(rng.gen_range(0.0..cell.lengths[1])),
                T::from_f64(rng.gen_range(0.0..cell.lengths[2])),
            ]
        })
        .collect();
    let mut values = vec![T::zero(); set.n_lanes()];
    let start = Instant::now();
    let mut checksum_v = 0.0f64;
    for &p in &positions {
        set.eval_v(p, &mut values);
        checksum_v += values[0].to_f64();
    }
    let v_seconds = start.elapsed().as_secs_f64();
    let mut scratch = SpoScratch::new(set.n_lanes());
    let start = Instant::now();
    let mut checksum_vgh = 0.0f64;
    for &p in &positions {
        set.eval_vgh(p, &mut scratch);
        checksum_vgh += scratch.v[0].to_f64() + scratch.laplacian(0).to_f64();
    }
    let vgh_seconds = start.elapsed().as_secs_f64();
    (
        KernelBenchResult {
            seconds: v_seconds,
            moves: evals as u64,
            checksum: checksum_v,
            throughput: evals as f64 / v_seconds.max(1e-12),
        },
        KernelBenchResult {
            seconds: vgh_seconds,
            moves: evals as u64,
            checksum: checksum_vgh,
            throughput: evals as f64 / vgh_seconds.max(1e-12),
        },
    )
}
