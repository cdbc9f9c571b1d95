//! Machine-readable run reports: metadata, per-kernel timings, population
//! statistics, memory accounting and correctness checksums.

use crate::drivers::{Precision, RunOutput, Variant};
use crate::engine::Engine;
use crate::stats::PopulationStats;
use crate::timers::{KernelTimers, ALL_TAGS};
use crate::Real;
use serde::Serialize;
use std::collections::BTreeMap;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Footprint model: gamma (N_threads + N_walkers) N^2 bytes, with the
/// 60-byte default covering the double-precision two-body Jastrow and
/// determinant state per electron pair.
pub const DEFAULT_GAMMA_BYTES: u64 = 60;

pub fn memory_model(gamma: u64, n: usize, n_threads: usize, n_walkers: usize) -> u64 {
    gamma * (n_threads as u64 + n_walkers as u64) * (n as u64) * (n as u64)
}

#[derive(Debug, Clone, Serialize)]
pub struct GammaModel {
    pub gamma_bytes: u64,
    pub n: usize,
    pub n_threads: usize,
    pub n_walkers: usize,
    pub predicted_bytes: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MeasuredMemory {
    /// Shared read-only orbital table.
    pub spline_table_bytes: u64,
    /// Distance tables plus component state of one compute engine.
    pub per_thread_engine_bytes: u64,
    /// All walker buffers plus position records.
    pub walker_bytes: u64,
    pub total_bytes: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MemoryReport {
    /// Scalar width of the working precision.
    pub precision_bytes: u64,
    /// Per-walker state bytes by wavefunction component at the working
    /// precision (the walker-message payload).
    pub per_walker_component_bytes: BTreeMap<String, u64>,
    pub per_walker_total_bytes: u64,
    pub gamma_model: GammaModel,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measured: Option<MeasuredMemory>,
    /// Synthetic orbital-table size, reported side by side with the
    /// original workload's table size when the preset records one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synthetic_bspline_gb: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table_bspline_gb: Option<f64>,
}

/// Per-walker component accounting for an engine configuration.
pub fn per_walker_bytes<T: Real>(engine: &Engine<T>, precision_bytes: u64) -> BTreeMap<String, u64> {
    let mut map = BTreeMap::new();
    for (name, scalars) in engine.psi.storage_breakdown() {
        map.insert(name.to_string(), scalars as u64 * precision_bytes);
    }
    map.insert("Positions".into(), engine.n_electrons() as u64 * 3 * precision_bytes);
    map
}

/// Per-walker component scalar counts derived from the workload sizes alone,
/// so memory reports do not require building the (possibly huge) orbital
/// table. Must agree with [`per_walker_bytes`] on a built engine.
pub fn component_scalars(spec: &crate::presets::SystemSpec, variant: Variant) -> Vec<(String, usize)> {
    let n = spec.n_electrons();
    let mut out = Vec::new();
    if !spec.jastrow.j1_amps.is_empty() {
        out.push(("J1".to_string(), 5 * n));
    }
    if spec.jastrow.has_j2() {
        let scalars = match variant {
            Variant::Ref => 5 * n * n,
            Variant::Opt => 5 * n,
        };
        out.push(("J2".to_string(), scalars));
    }
    out.push(("DetUp".to_string(), spec.n_up * spec.n_up));
    out.push(("DetDown".to_string(), spec.n_dn * spec.n_dn));
    out.push(("Positions".to_string(), 3 * n));
    out
}

/// Assemble the memory section of a report from workload sizes.
pub fn memory_report_for(
    spec: &crate::presets::SystemSpec,
    variant: Variant,
    precision: Precision,
    n_threads: usize,
    n_walkers: usize,
    measured: Option<MeasuredMemory>,
    synthetic_bspline_bytes: Option<u64>,
) -> MemoryReport {
    let precision_bytes = match precision {
        Precision::Double => 8,
        Precision::Mixed => 4,
    };
    let per_walker: BTreeMap<String, u64> = component_scalars(spec, variant)
        .into_iter()
        .map(|(name, scalars)| (name, scalars as u64 * precision_bytes))
        .collect();
    let per_walker_total = per_walker.values().sum();
    let n = spec.n_electrons();
    MemoryReport {
        precision_bytes,
        per_walker_component_bytes: per_walker,
        per_walker_total_bytes: per_walker_total,
        gamma_model: GammaModel {
            gamma_bytes: DEFAULT_GAMMA_BYTES,
            n,
            n_threads,
            n_walkers,
            predicted_bytes: memory_model(DEFAULT_GAMMA_BYTES, n, n_threads, n_walkers),
        },
        measured,
        synthetic_bspline_gb: synthetic_bspline_bytes.map(|b| b as f64 / 1e9),
        table_bspline_gb: spec.table_bspline_gb,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StatsBlock {
    pub e_mean: f64,
    pub sigma2: f64,
    pub tau_corr: f64,
    pub kappa: f64,
    pub throughput: f64,
    pub avg_population: f64,
    pub acceptance: f64,
    pub t_mc_seconds: f64,
    pub steps: usize,
    pub clamp_warnings: usize,
    pub flagged_walkers: usize,
}

impl StatsBlock {
    pub fn from_run(stats: &PopulationStats, acceptance: f64) -> Self {
        Self {
            e_mean: stats.e_mean,
            sigma2: stats.sigma2,
            tau_corr: stats.tau_corr,
            kappa: stats.kappa,
            throughput: stats.throughput,
            avg_population: stats.avg_population,
            acceptance,
            t_mc_seconds: stats.t_mc_seconds,
            steps: stats.steps,
            clamp_warnings: stats.clamp_warnings,
            flagged_walkers: stats.flagged_walkers,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Checksums {
    pub logpsi: f64,
    pub e_total: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel_checksum: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verified: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub n_electrons: usize,
    pub n_ions: usize,
    pub variant: Variant,
    pub precision: Precision,
    pub threads: usize,
    pub seed: u64,
    pub steps: usize,
    pub walkers: usize,
    pub tau: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub meta: Meta,
    /// Absolute seconds per kernel tag.
    pub timers: BTreeMap<String, f64>,
    /// Normalized fractions of the tagged total (sums to <= 1).
    pub timer_fractions: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stats: Option<StatsBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub memory: Option<MemoryReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checksums: Option<Checksums>,
    pub warnings: Vec<String>,
}

pub fn timer_map(timers: &KernelTimers) -> BTreeMap<String, f64> {
    ALL_TAGS.iter().map(|&t| (t.label().to_string(), timers.seconds(t))).collect()
}

pub fn timer_fractions(timers: &KernelTimers, total_seconds: f64) -> BTreeMap<String, f64> {
    let denom = if total_seconds > 0.0 { total_seconds } else { 1.0 };
    ALL_TAGS
        .iter()
        .map(|&t| (t.label().to_string(), (timers.seconds(t) / denom).min(1.0)))
        .collect()
}

impl Report {
    pub fn from_run(meta: Meta, out: &RunOutput) -> Self {
        let total = out.stats.t_mc_seconds;
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            meta,
            timers: timer_map(&out.timers),
            timer_fractions: timer_fractions(&out.timers, total),
            stats: Some(StatsBlock::from_run(&out.stats, out.acceptance_ratio)),
            memory: None,
            checksums: Some(Checksums {
                logpsi: out.final_logpsi,
                e_total: out.stats.e_mean,
                kernel_checksum: None,
                verified: None,
            }),
            warnings: Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_model_arithmetic() {
        // 60 bytes, N = 768, one thread plus one walker.
        assert_eq!(memory_model(60, 768, 1, 1), 70_778_880);
        // quadratic in N
        assert_eq!(memory_model(60, 2 * 768, 1, 1), 4 * 70_778_880);
    }

    #[test]
    fn fractions_are_bounded() {
        let mut t = KernelTimers::new(true);
        t.add(crate::timers::KernelTag::J2, std::time::Duration::from_millis(30));
        t.set_other_from_total(0.1);
        let f = timer_fractions(&t, 0.1);
        let sum: f64 = f.values().sum();
        assert!(sum <= 1.0 + 1e-9);
        assert!((f["J2"] - 0.3).abs() < 1e-9);
    }
}
