//! Run statistics: weighted energy moments, blocking-transform estimate of
//! the autocorrelation time, and the derived efficiency/throughput figures.

use serde::Serialize;

/// Blocking-transform estimate of the autocorrelation time of a series.
///
/// Successive pair-averaging passes double the block size; the statistical
/// inefficiency s_l = B_l var_l / var_0 grows until blocks are longer than
/// the correlation time and then plateaus. The plateau value is tau_corr:
/// 1 for white noise, (1 + a) / (1 - a) for an AR(1) process with
/// coefficient a.
pub fn blocking_tau_corr(series: &[f64]) -> f64 {
    const MIN_BLOCKS: usize = 32;
    const PLATEAU_REL_STEP: f64 = 0.02;
    if series.len() < 2 {
        return 1.0;
    }
    let var0 = variance(series);
    if var0 <= 0.0 {
        return 1.0;
    }
    let mut blocked: Vec<f64> = series.to_vec();
    let mut block_len = 1usize;
    let mut estimates = vec![1.0f64];
    while blocked.len() / 2 >= MIN_BLOCKS {
        let halved: Vec<f64> =
            blocked.chunks_exact(2).map(|p| 0.5 * (p[0] + p[1])).collect();
        blocked = halved;
        block_len *= 2;
        estimates.push(block_len as f64 * variance(&blocked) / var0);
    }
    // First level whose growth has flattened; fall back to the deepest level
    // when the series is too short to reach a plateau.
    for w in estimates.windows(2) {
        if w[1] <= w[0] * (1.0 + PLATEAU_REL_STEP) {
            return w[1].max(1.0);
        }
    }
    estimates.last().copied().unwrap_or(1.0).max(1.0)
}

fn variance(series: &[f64]) -> f64 {
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Running weighted moments of the local energy over all samples.
#[derive(Debug, Clone, Default)]
pub struct EnergyAccumulator {
    weight_sum: f64,
    e_sum: f64,
    e2_sum: f64,
}

impl EnergyAccumulator {
    pub fn add(&mut self, e_local: f64, weight: f64) {
        self.weight_sum += weight;
        self.e_sum += weight * e_local;
        self.e2_sum += weight * e_local * e_local;
    }

    pub fn merge(&mut self, other: &EnergyAccumulator) {
        self.weight_sum += other.weight_sum;
        self.e_sum += other.e_sum;
        self.e2_sum += other.e2_sum;
    }

    pub fn mean(&self) -> f64 {
        if self.weight_sum > 0.0 {
            self.e_sum / self.weight_sum
        } else {
            0.0
        }
    }

    /// Weighted population variance of the samples.
    pub fn variance(&self) -> f64 {
        if self.weight_sum > 0.0 {
            let m = self.mean();
            (self.e2_sum / self.weight_sum - m * m).max(0.0)
        } else {
            0.0
        }
    }
}

/// Population-level outcome of a run.
#[derive(Debug, Clone, Serialize)]
pub struct PopulationStats {
    /// Trial-energy trajectory, one entry per generation.
    pub e_trial: Vec<f64>,
    /// Weighted ensemble mean of E_L per generation.
    pub e_step_means: Vec<f64>,
    /// Grand weighted mean of E_L over all samples.
    pub e_mean: f64,
    /// Weighted variance of E_L over all samples.
    pub sigma2: f64,
    /// Blocking estimate on the per-generation mean series.
    pub tau_corr: f64,
    pub avg_population: f64,
    /// Population after branching, one entry per generation.
    pub pop_series: Vec<usize>,
    /// Wall-clock seconds of the Monte Carlo loop.
    pub t_mc_seconds: f64,
    /// kappa = 1 / (sigma^2 tau_corr T_MC); zero when sigma^2 vanishes.
    pub kappa: f64,
    /// P = M <N_w> / T_CPU in samples per second.
    pub throughput: f64,
    pub steps: usize,
    pub clamp_warnings: usize,
    pub flagged_walkers: usize,
}

impl PopulationStats {
    #[allow(clippy::too_many_arguments)]
    pub fn finalize(
        e_trial: Vec<f64>,
        e_step_means: Vec<f64>,
        acc: &EnergyAccumulator,
        avg_population: f64,
        pop_series: Vec<usize>,
        t_mc_seconds: f64,
        clamp_warnings: usize,
        flagged_walkers: usize,
    ) -> Self {
        let steps = e_step_means.len();
        let sigma2 = acc.variance();
        let tau_corr = blocking_tau_corr(&e_step_means);
        let kappa = if sigma2 > 0.0 && t_mc_seconds > 0.0 {
            1.0 / (sigma2 * tau_corr * t_mc_seconds)
        } else {
            0.0
        };
        let throughput = if t_mc_seconds > 0.0 {
            steps as f64 * avg_population / t_mc_seconds
        } else {
            0.0
        };
        Self {
            e_trial,
            e_step_means,
            e_mean: acc.mean(),
            sigma2,
            tau_corr,
            avg_population,
            pop_series,
            t_mc_seconds,
            kappa,
            throughput,
            steps,
            clamp_warnings,
            flagged_walkers,
        }
    }
}
