//! Empirical distribution-specific sample complexity.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adversarial::adversarial_trial;
use super::learner::{mem_fit, Algorithm, MemConfig};
use super::misclassification_error;
use crate::error::{invalid, Result};
use crate::rng::{stream, Lane};
use crate::spectra::check_gamma;
use crate::stats::binomial_stderr;
use crate::subgauss::Distribution;

/// Sample sizes to try: an explicit grid, or `start, 2·start, …` up to `max`
/// stopping at the first success.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MGrid {
    List(Vec<usize>),
    Doubling { start: usize, max: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleComplexityConfig {
    pub epsilon: f64,
    pub gamma: f64,
    pub delta: f64,
    pub algorithm: Algorithm,
    pub grid: MGrid,
    pub trials: usize,
    pub test_size: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mem: MemConfig,
    /// Overrides the distribution's own `ℓ*_γ`.
    #[serde(default)]
    pub l_star: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComplexityRow {
    pub m: usize,
    pub trials: usize,
    pub failures: usize,
    pub failure_rate: f64,
    pub stderr: f64,
    pub mean_test_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleComplexityReport {
    pub algorithm: String,
    pub l_star: f64,
    pub epsilon: f64,
    pub gamma: f64,
    pub delta: f64,
    pub rows: Vec<ComplexityRow>,
    /// Smallest tried `m` whose failure rate is at most `δ`.
    pub m_hat: Option<usize>,
    pub exceeds_grid: bool,
}

/// For each `m`, runs `trials` rounds of train-then-test and counts a
/// failure when `ℓ₀(ŵ, test) − ℓ*_γ > ε`. Trial `t` at grid position `k`
/// uses stream `(k << 32) | t` on every lane.
pub fn estimate_sample_complexity(dist: &Distribution, cfg: &SampleComplexityConfig) -> Result<SampleComplexityReport> {
    check_gamma(cfg.gamma)?;
    cfg.mem.validate()?;
    if !(cfg.epsilon > 0.0 && cfg.epsilon < 1.0) || !(cfg.delta > 0.0 && cfg.delta < 1.0) {
        return invalid("epsilon and delta must lie in (0,1)");
    }
    if cfg.trials == 0 || cfg.test_size == 0 {
        return invalid("trials and test_size must be positive");
    }
    let l_star = match cfg.l_star {
        Some(l) => l,
        None => dist.optimal_margin_error(cfg.gamma, cfg.seed)?,
    };

    let mut rows = Vec::new();
    let run = |k: usize, m: usize| row(dist, cfg, l_star, k, m);
    match &cfg.grid {
        MGrid::List(ms) => {
            if ms.is_empty() {
                return invalid("m grid is empty");
            }
            for (k, &m) in ms.iter().enumerate() {
                rows.push(run(k, m)?);
            }
        }
        MGrid::Doubling { start, max } => {
            if *start == 0 || start > max {
                return invalid(format!("doubling grid needs 1 <= start <= max, got {start}..{max}"));
            }
            let mut m = *start;
            let mut k = 0;
            while m <= *max {
                let r = run(k, m)?;
                let done = r.failure_rate <= cfg.delta;
                rows.push(r);
                if done {
                    break;
                }
                m *= 2;
                k += 1;
            }
        }
    }
    let m_hat = rows.iter().find(|r| r.failure_rate <= cfg.delta).map(|r| r.m);
    Ok(SampleComplexityReport {
        algorithm: cfg.algorithm.label(),
        l_star,
        epsilon: cfg.epsilon,
        gamma: cfg.gamma,
        delta: cfg.delta,
        rows,
        m_hat,
        exceeds_grid: m_hat.is_none(),
    })
}

fn row(dist: &Distribution, cfg: &SampleComplexityConfig, l_star: f64, k: usize, m: usize) -> Result<ComplexityRow> {
    let errors = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let index = ((k as u64) << 32) | t as u64;
            if let Algorithm::Adversarial { restarts } = cfg.algorithm {
                let fallback = Algorithm::Auto { restarts };
                return Ok(adversarial_trial(dist, m, cfg.gamma, cfg.test_size, &fallback, &cfg.mem, cfg.seed, index)?.test_error);
            }
            let train = dist.sample(m, &mut stream(cfg.seed, Lane::Train, index));
            let test = dist.sample(cfg.test_size, &mut stream(cfg.seed, Lane::Test, index));
            let fit = mem_fit(&train, cfg.gamma, &cfg.algorithm, &cfg.mem, index)?;
            Ok(misclassification_error(&fit.w, &test).rate())
        })
        .collect::<Result<Vec<f64>>>()?;
    let failures = errors.iter().filter(|&&e| e - l_star > cfg.epsilon).count();
    let rate = failures as f64 / cfg.trials as f64;
    Ok(ComplexityRow {
        m,
        trials: cfg.trials,
        failures,
        failure_rate: rate,
        stderr: binomial_stderr(rate, cfg.trials),
        mean_test_error: errors.iter().sum::<f64>() / cfg.trials as f64,
    })
}
