//! Random Gram-matrix experiments: how often a random sample is
//! γ-shattered, and how the smallest Gram eigenvalue scales with `m/d`.
//!
//! Trials are keyed by `(seed, index)` and collected in index order, so the
//! reported numbers do not depend on how rayon schedules them.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::linalg::SampleMatrix;
use crate::rng::{stream, Lane};
use crate::shattering::{eigenvalue_sufficient_check, is_gamma_shattered_at_origin, lambda_min_gram};
use crate::spectra::check_gamma;
use crate::stats::{binomial_stderr, mean_and_stderr, quantile};
use crate::subgauss::Distribution;

pub use crate::shattering::lambda_min_gram as gram_lambda_min;

/// Limit of `λ_min(XX^T/d)` for i.i.d. entries of variance `σ²` and
/// `m/d → β < 1`: `σ²(1 − √β)²`.
pub fn asymptotic_lambda_min_limit(sigma2: f64, beta: f64) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return invalid(format!("sigma² must be positive, got {sigma2}"));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return invalid(format!("beta must lie in (0,1), got {beta}"));
    }
    Ok(sigma2 * (1.0 - beta.sqrt()).powi(2))
}

/// `m° = d/(1 + γ/σ)²`, the root of `σ²(√d − √m)² = mγ²` below `d`.
pub fn critical_sample_size(sigma: f64, gamma: f64, d: usize) -> Result<f64> {
    if !(sigma > 0.0) {
        return invalid(format!("sigma must be positive, got {sigma}"));
    }
    check_gamma(gamma)?;
    Ok(d as f64 / (1.0 + gamma / sigma).powi(2))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShatterTrial {
    pub trial: usize,
    pub m: usize,
    pub lambda_min: f64,
    pub shattered_eig: bool,
    pub shattered_exact: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShatterProbReport {
    pub m: usize,
    pub gamma: f64,
    pub trials: usize,
    pub p_eig: f64,
    pub stderr_eig: f64,
    pub p_exact: Option<f64>,
    pub stderr_exact: Option<f64>,
    #[serde(skip)]
    pub rows: Vec<ShatterTrial>,
}

/// Monte Carlo estimate of `P[λ_min(XX^T) ≥ mγ²]` and, when `m ≤ cap`, of
/// `P[X is γ-shattered at the origin]`.
pub fn shattering_probability(
    dist: &Distribution,
    m: usize,
    gamma: f64,
    trials: usize,
    seed: u64,
    cap: usize,
) -> Result<ShatterProbReport> {
    check_gamma(gamma)?;
    if trials == 0 {
        return invalid("trials must be at least 1");
    }
    if m == 0 {
        return invalid("m must be at least 1");
    }
    let exact = m <= cap;
    let rows = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<ShatterTrial> {
            let sample = dist.sample(m, &mut stream(seed, Lane::Train, t as u64));
            let x = &sample.x;
            let shattered_exact = if exact {
                Some(is_gamma_shattered_at_origin(x, gamma, cap)?)
            } else {
                None
            };
            Ok(ShatterTrial {
                trial: t,
                m,
                lambda_min: lambda_min_gram(x),
                shattered_eig: eigenvalue_sufficient_check(x, gamma),
                shattered_exact,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let n = trials as f64;
    let p_eig = rows.iter().filter(|r| r.shattered_eig).count() as f64 / n;
    let p_exact = exact.then(|| rows.iter().filter(|r| r.shattered_exact == Some(true)).count() as f64 / n);
    Ok(ShatterProbReport {
        m,
        gamma,
        trials,
        p_eig,
        stderr_eig: binomial_stderr(p_eig, trials),
        p_exact,
        stderr_exact: p_exact.map(|p| binomial_stderr(p, trials)),
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigenTrial {
    pub trial: usize,
    pub m: usize,
    pub lambda_min: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigenCurveRow {
    pub m: usize,
    pub trials: usize,
    /// Mean of `λ_min(XX^T)/d`.
    pub mean_over_d: f64,
    pub stderr_over_d: f64,
    pub q10_over_d: f64,
    pub q50_over_d: f64,
    pub q90_over_d: f64,
    /// Empirical `P[λ_min(XX^T) ≥ m]`.
    pub p_ge_m: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigenCurve {
    pub d: usize,
    pub trace: f64,
    pub rows: Vec<EigenCurveRow>,
    #[serde(skip)]
    pub trials: Vec<EigenTrial>,
}

impl EigenCurve {
    /// Largest grid `m` with empirical `P[λ_min ≥ m] ≥ δ`.
    pub fn frontier(&self, delta: f64) -> Option<usize> {
        self.rows.iter().filter(|r| r.p_ge_m >= delta).map(|r| r.m).max()
    }

    /// `frontier(δ) / trace(Σ)`.
    pub fn frontier_ratio(&self, delta: f64) -> Option<f64> {
        self.frontier(delta).map(|m| m as f64 / self.trace)
    }
}

/// Per-`m` summary of `λ_min(XX^T)` over `trials` draws. The distribution
/// must satisfy `Σ ≤ I`; rescale before calling.
pub fn finite_sample_eigen_curve(dist: &Distribution, m_list: &[usize], trials: usize, seed: u64) -> Result<EigenCurve> {
    if m_list.is_empty() {
        return invalid("m grid is empty");
    }
    if trials == 0 {
        return invalid("trials must be at least 1");
    }
    let spectrum = dist.spectrum()?;
    if spectrum.largest() > 1.0 + 1e-12 {
        return invalid(format!(
            "covariance must satisfy Σ ≤ I, largest eigenvalue is {}",
            spectrum.largest()
        ));
    }
    let d = dist.dim();
    let jobs: Vec<(usize, usize, usize)> = m_list
        .iter()
        .enumerate()
        .flat_map(|(k, &m)| (0..trials).map(move |t| (k, m, t)))
        .collect();
    let all: Vec<EigenTrial> = jobs
        .par_iter()
        .map(|&(k, m, t)| {
            let index = ((k as u64) << 32) | t as u64;
            let x: SampleMatrix = dist.sample(m, &mut stream(seed, Lane::Train, index)).x;
            EigenTrial {
                trial: t,
                m,
                lambda_min: if m == 0 { 0.0 } else { lambda_min_gram(&x) },
            }
        })
        .collect();
    let rows = m_list
        .iter()
        .enumerate()
        .map(|(k, &m)| {
            let vals: Vec<f64> = all[k * trials..(k + 1) * trials].iter().map(|e| e.lambda_min / d as f64).collect();
            let (mean, se) = mean_and_stderr(&vals);
            let hits = all[k * trials..(k + 1) * trials]
                .iter()
                .filter(|e| e.lambda_min >= m as f64)
                .count();
            EigenCurveRow {
                m,
                trials,
                mean_over_d: mean,
                stderr_over_d: se,
                q10_over_d: quantile(&vals, 0.1),
                q50_over_d: quantile(&vals, 0.5),
                q90_over_d: quantile(&vals, 0.9),
                p_ge_m: hits as f64 / trials as f64,
            }
        })
        .collect();
    Ok(EigenCurve {
        d,
        trace: spectrum.trace(),
        rows,
        trials: all,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::{margin_adapted_dimension, CovarianceSpectrum};
    use crate::subgauss::{LabelRule, Marginal, ProductDistributionSpec};

    fn gaussian(d: usize) -> Distribution {
        Distribution::Product(ProductDistributionSpec::iid(Marginal::Gaussian { sigma: 1.0 }, d, LabelRule::default()).unwrap())
    }

    #[test]
    fn limit_examples() {
        assert_eq!(asymptotic_lambda_min_limit(1.0, 0.25).unwrap(), 0.25);
        assert!((asymptotic_lambda_min_limit(1.0, 1e-12).unwrap() - 1.0).abs() < 1e-5);
        assert_eq!(asymptotic_lambda_min_limit(2.0, 0.25).unwrap(), 0.5);
        assert!(asymptotic_lambda_min_limit(1.0, 1.0).is_err());
        assert!(asymptotic_lambda_min_limit(1.0, 0.0).is_err());
    }

    #[test]
    fn critical_size_examples() {
        let m = critical_sample_size(1.0, 1.0, 100).unwrap();
        assert_eq!(m, 25.0);
        assert_eq!((100f64.sqrt() - m.sqrt()).powi(2), m * 1.0);
        assert!((critical_sample_size(1.0, 1e-12, 100).unwrap() - 100.0).abs() < 1e-6);
        assert!(critical_sample_size(0.0, 1.0, 100).is_err());
    }

    #[test]
    fn sandwich_against_kgamma() {
        for sigma in [0.25, 0.5, 1.0, 2.0, 4.0] {
            for gamma in [0.25, 0.5, 1.0, 2.0, 4.0] {
                for d in [100usize, 1000] {
                    let k = margin_adapted_dimension(&CovarianceSpectrum::constant(d, sigma * sigma).unwrap(), gamma).unwrap() as f64;
                    let m0 = critical_sample_size(sigma, gamma, d).unwrap();
                    assert!(0.5 * k - 1.0 <= m0 && m0 <= k + 1.0, "σ={sigma} γ={gamma} d={d}: k={k}, m°={m0}");
                }
            }
        }
    }

    #[test]
    fn well_conditioned_regime_is_almost_surely_shattered() {
        let r = shattering_probability(&gaussian(400), 40, 1.0, 20, 3, 20).unwrap();
        assert_eq!(r.p_eig, 1.0);
        assert!(r.p_exact.is_none());
        assert!(r.rows.iter().all(|t| t.lambda_min > 100.0));
    }

    #[test]
    fn more_points_than_dimensions_never_pass() {
        let r = shattering_probability(&gaussian(3), 5, 1e-3, 30, 1, 20).unwrap();
        assert_eq!(r.p_eig, 0.0);
        assert_eq!(r.p_exact, Some(0.0));
    }

    #[test]
    fn tiny_margin_means_linear_independence() {
        let r = shattering_probability(&gaussian(8), 6, 1e-4, 50, 2, 20).unwrap();
        assert_eq!(r.p_exact, Some(1.0));
    }

    #[test]
    fn exact_dominates_eigen_check() {
        let r = shattering_probability(&gaussian(30), 10, 0.6, 200, 7, 20).unwrap();
        for t in &r.rows {
            if t.shattered_eig {
                assert_eq!(t.shattered_exact, Some(true));
            }
        }
        assert!(r.p_exact.unwrap() >= r.p_eig);
    }

    #[test]
    fn shatter_probability_monotone_in_m_and_gamma() {
        let dist = gaussian(30);
        let mut prev = f64::INFINITY;
        for m in [4, 8, 12, 16] {
            let r = shattering_probability(&dist, m, 0.8, 300, 11, 20).unwrap();
            let p = r.p_exact.unwrap();
            assert!(p <= prev + 3.0 * r.stderr_exact.unwrap().max(1e-3), "m={m}: {p} > {prev}");
            prev = p;
        }
        let mut prev = f64::INFINITY;
        for gamma in [0.4, 0.8, 1.2, 1.6] {
            let r = shattering_probability(&dist, 10, gamma, 300, 11, 20).unwrap();
            let p = r.p_exact.unwrap();
            assert!(p <= prev + 3.0 * r.stderr_exact.unwrap().max(1e-3));
            prev = p;
        }
    }

    #[test]
    fn eigen_curve_tracks_the_limit() {
        let curve = finite_sample_eigen_curve(&gaussian(400), &[40, 100, 200, 300, 400], 8, 5).unwrap();
        let means: Vec<f64> = curve.rows.iter().map(|r| r.mean_over_d).collect();
        for w in curve.rows.windows(2) {
            assert!(w[1].mean_over_d <= w[0].mean_over_d + 2.0 * (w[0].stderr_over_d + w[1].stderr_over_d));
        }
        for r in &curve.rows[..4] {
            let limit = asymptotic_lambda_min_limit(1.0, r.m as f64 / 400.0).unwrap();
            assert!(
                (r.mean_over_d - limit).abs() <= 0.1 * limit.max(0.05),
                "m={}: {} vs {limit}",
                r.m,
                r.mean_over_d
            );
        }
        assert!(means[4] < 0.01);
        assert!(curve.frontier(0.5).is_some());
    }

    #[test]
    fn eigen_curve_is_reproducible() {
        let a = finite_sample_eigen_curve(&gaussian(50), &[10], 1, 99).unwrap();
        let b = finite_sample_eigen_curve(&gaussian(50), &[10], 1, 99).unwrap();
        assert_eq!(a, b);
        assert!(finite_sample_eigen_curve(&gaussian(50), &[], 1, 99).is_err());
        let wide = Distribution::Product(ProductDistributionSpec::iid(Marginal::Gaussian { sigma: 2.0 }, 5, LabelRule::default()).unwrap());
        assert!(finite_sample_eigen_curve(&wide, &[2], 1, 0).is_err());
    }
}
