//! Named, seeded experiments producing a CSV table and a JSON summary.
//!
//! Every float in a CSV is printed with 17 significant digits and rows come
//! out in a fixed order, so a config and seed replay byte for byte on any
//! number of threads.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::bounds::lower_bound_value;
use crate::error::{invalid, Result};
use crate::gram::{asymptotic_lambda_min_limit, critical_sample_size, finite_sample_eigen_curve, shattering_probability};
use crate::io::{distribution_to_json, parse_distribution};
use crate::mem::{adversarial_trial, estimate_sample_complexity, Algorithm, MGrid, MemConfig, SampleComplexityConfig};
use crate::rng::{stream, Lane};
use crate::shattering::{min_shatter_margin, DEFAULT_ENUMERATION_CAP};
use crate::spectra::{margin_adapted_dimension, mixture_gaussian_kgamma, CovarianceSpectrum};
use crate::stats::{binomial_stderr, quantile};
use crate::subgauss::{Distribution, LabelRule, Marginal, ProductDistributionSpec, Twin, TwinDistributionSpec};

pub const SCHEMA: &str = "1";

/// A config file: the experiment name, its parameters, and the seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(flatten)]
    pub experiment: Experiment,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum Experiment {
    EigCurve(EigCurve),
    ShatterProb(ShatterProb),
    SampleComplexity(SampleComplexity),
    AdversarialDemo(AdversarialDemo),
    ExampleL1l2(ExampleL1l2),
    ExampleMixture(ExampleMixture),
    Twins(Twins),
    Sandwich(Sandwich),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigCurve {
    pub distribution: Value,
    pub m_grid: Vec<usize>,
    #[serde(default = "default_curve_trials")]
    pub trials: usize,
    /// Confidence for the empirical frontier `max{m : P[λ_min ≥ m] ≥ δ}`.
    #[serde(default = "half")]
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShatterProb {
    pub distribution: Value,
    pub m_grid: Vec<usize>,
    pub gamma_grid: Vec<f64>,
    #[serde(default = "default_prob_trials")]
    pub trials: usize,
    #[serde(default = "default_cap")]
    pub cap: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleComplexity {
    pub distribution: Value,
    pub epsilon: f64,
    pub gamma: f64,
    pub delta: f64,
    #[serde(default = "default_algorithm")]
    pub algorithm: Algorithm,
    pub m_grid: MGrid,
    #[serde(default = "default_prob_trials")]
    pub trials: usize,
    #[serde(default = "default_test_size")]
    pub test_size: usize,
    #[serde(default)]
    pub mem: MemConfig,
    #[serde(default)]
    pub l_star: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdversarialDemo {
    pub distribution: Value,
    /// Size of the shattered set; training uses `m/2` points.
    pub m: usize,
    /// Margin; when absent it is calibrated from the `calibration_quantile`
    /// of the exact `γ*` over `calibration_trials` draws of size `m`.
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default = "default_quantile")]
    pub calibration_quantile: f64,
    #[serde(default = "default_curve_trials")]
    pub calibration_trials: usize,
    #[serde(default = "default_curve_trials")]
    pub trials: usize,
    #[serde(default = "default_test_size")]
    pub test_size: usize,
    /// A trial counts as a failure of learning when its test error is at
    /// least this.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub mem: MemConfig,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExampleL1l2 {
    pub d_grid: Vec<usize>,
    #[serde(default = "default_marginal")]
    pub marginal: Marginal,
    #[serde(default = "one")]
    pub gamma: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default)]
    pub c_lower: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExampleMixture {
    pub d_grid: Vec<usize>,
    pub v_grid: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Twins {
    pub d: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "one")]
    pub gamma: f64,
    #[serde(default = "default_twin_grid")]
    pub m_grid: Vec<usize>,
    #[serde(default = "default_prob_trials_small")]
    pub trials: usize,
    #[serde(default = "default_test_size")]
    pub test_size: usize,
    /// Margin slack for the learner. The twins put every point exactly at
    /// margin 1 under `e_1`, so the boundary must be admitted.
    #[serde(default = "default_twin_slack")]
    pub slack: f64,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    /// Shattered-set size for the adversarial run on `P`.
    #[serde(default = "default_adversarial_m")]
    pub adversarial_m: usize,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sandwich {
    pub sigma_grid: Vec<f64>,
    pub gamma_grid: Vec<f64>,
    pub d_grid: Vec<usize>,
}

fn default_curve_trials() -> usize {
    200
}
fn default_prob_trials() -> usize {
    1000
}
fn default_prob_trials_small() -> usize {
    200
}
fn default_cap() -> usize {
    DEFAULT_ENUMERATION_CAP
}
fn default_test_size() -> usize {
    2000
}
fn default_algorithm() -> Algorithm {
    Algorithm::Auto {
        restarts: default_restarts(),
    }
}
fn default_restarts() -> usize {
    8
}
fn default_quantile() -> f64 {
    0.05
}
fn default_threshold() -> f64 {
    0.45
}
fn default_marginal() -> Marginal {
    Marginal::Rademacher { b: 1.0 }
}
fn default_beta() -> f64 {
    0.1
}
fn default_epsilon() -> f64 {
    0.2
}
fn default_delta() -> f64 {
    0.25
}
fn default_twin_grid() -> Vec<usize> {
    vec![1, 2, 3, 4, 6, 8, 12, 16, 24, 32]
}
fn default_twin_slack() -> f64 {
    -1e-9
}
fn default_adversarial_m() -> usize {
    6
}
fn half() -> f64 {
    0.5
}
fn one() -> f64 {
    1.0
}

/// A CSV body and the JSON summary that goes with it.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentOutput {
    pub name: &'static str,
    pub csv: String,
    pub summary: Value,
}

/// Float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

struct Table {
    out: String,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self {
            out: header.join(",") + "\n",
        }
    }

    fn row(&mut self, cells: &[String]) {
        let _ = writeln!(self.out, "{}", cells.join(","));
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn name(&self) -> &'static str {
        match self.experiment {
            Experiment::EigCurve(_) => "eig-curve",
            Experiment::ShatterProb(_) => "shatter-prob",
            Experiment::SampleComplexity(_) => "sample-complexity",
            Experiment::AdversarialDemo(_) => "adversarial-demo",
            Experiment::ExampleL1l2(_) => "example-l1l2",
            Experiment::ExampleMixture(_) => "example-mixture",
            Experiment::Twins(_) => "twins",
            Experiment::Sandwich(_) => "sandwich",
        }
    }

    /// Run the experiment. Relative paths inside distribution specs resolve
    /// against `base_dir`.
    pub fn run(&self, base_dir: Option<&Path>) -> Result<ExperimentOutput> {
        let mut resolved = self.clone();
        let seed = self.seed;
        let (csv, results) = match &mut resolved.experiment {
            Experiment::EigCurve(c) => eig_curve(resolve(&mut c.distribution, base_dir)?, c, seed)?,
            Experiment::ShatterProb(c) => shatter_prob(resolve(&mut c.distribution, base_dir)?, c, seed)?,
            Experiment::SampleComplexity(c) => sample_complexity(resolve(&mut c.distribution, base_dir)?, c, seed)?,
            Experiment::AdversarialDemo(c) => adversarial_demo(resolve(&mut c.distribution, base_dir)?, c, seed)?,
            Experiment::ExampleL1l2(c) => example_l1l2(c)?,
            Experiment::ExampleMixture(c) => example_mixture(c)?,
            Experiment::Twins(c) => twins(c, seed)?,
            Experiment::Sandwich(c) => sandwich(c)?,
        };
        let summary = json!({
            "schema": SCHEMA,
            "experiment": self.name(),
            "seed": seed,
            "config": serde_json::to_value(&resolved)?,
            "results": results,
        });
        Ok(ExperimentOutput {
            name: self.name(),
            csv,
            summary,
        })
    }
}

/// Parse the distribution and replace the config entry by its fully
/// resolved form, so the summary replays without the original files.
fn resolve(spec: &mut Value, base_dir: Option<&Path>) -> Result<Distribution> {
    let dist = parse_distribution(spec, base_dir)?;
    *spec = distribution_to_json(&dist);
    Ok(dist)
}

fn nonempty<T>(name: &str, v: &[T]) -> Result<()> {
    if v.is_empty() {
        invalid(format!("{name} is empty"))
    } else {
        Ok(())
    }
}

fn eig_curve(dist: Distribution, c: &EigCurve, seed: u64) -> Result<(String, Value)> {
    nonempty("m_grid", &c.m_grid)?;
    let curve = finite_sample_eigen_curve(&dist, &c.m_grid, c.trials, seed)?;
    let sigma2 = curve.trace / curve.d as f64;
    let mut t = Table::new(&[
        "m",
        "trials",
        "beta",
        "mean_over_d",
        "stderr_over_d",
        "q10_over_d",
        "q50_over_d",
        "q90_over_d",
        "p_ge_m",
        "limit",
        "within_band",
    ]);
    let mut band = Vec::new();
    for r in &curve.rows {
        let beta = r.m as f64 / curve.d as f64;
        let limit = asymptotic_lambda_min_limit(sigma2, beta).ok();
        let within = limit.map(|l| (r.mean_over_d - l).abs() <= 0.1 * l);
        band.push(json!({"m": r.m, "limit": limit, "within_band": within}));
        t.row(&[
            r.m.to_string(),
            r.trials.to_string(),
            fmt_f64(beta),
            fmt_f64(r.mean_over_d),
            fmt_f64(r.stderr_over_d),
            fmt_f64(r.q10_over_d),
            fmt_f64(r.q50_over_d),
            fmt_f64(r.q90_over_d),
            fmt_f64(r.p_ge_m),
            fmt_opt(limit),
            within.map(|b| b.to_string()).unwrap_or_default(),
        ]);
    }
    let results = json!({
        "d": curve.d,
        "trace": curve.trace,
        "rows": curve.rows,
        "limit_band": band,
        "frontier": curve.frontier(c.delta),
        "frontier_over_trace": curve.frontier_ratio(c.delta),
    });
    Ok((t.out, results))
}

fn shatter_prob(dist: Distribution, c: &ShatterProb, seed: u64) -> Result<(String, Value)> {
    nonempty("m_grid", &c.m_grid)?;
    nonempty("gamma_grid", &c.gamma_grid)?;
    let mut t = Table::new(&["m", "gamma", "trial", "lambda_min", "shattered_eig", "shattered_exact"]);
    let mut summary = Vec::new();
    for &m in &c.m_grid {
        for &gamma in &c.gamma_grid {
            let r = shattering_probability(&dist, m, gamma, c.trials, seed, c.cap)?;
            for row in &r.rows {
                t.row(&[
                    m.to_string(),
                    fmt_f64(gamma),
                    row.trial.to_string(),
                    fmt_f64(row.lambda_min),
                    row.shattered_eig.to_string(),
                    row.shattered_exact.map(|b| b.to_string()).unwrap_or_default(),
                ]);
            }
            summary.push(r);
        }
    }
    Ok((t.out, json!({ "rows": summary })))
}

fn complexity_table(rows: &[crate::mem::ComplexityRow], label: Option<&str>) -> Table {
    let mut header = vec!["m", "trials", "failures", "failure_rate", "stderr", "mean_test_error"];
    if label.is_some() {
        header.insert(0, "curve");
    }
    let mut t = Table::new(&header);
    append_complexity(&mut t, rows, label);
    t
}

fn append_complexity(t: &mut Table, rows: &[crate::mem::ComplexityRow], label: Option<&str>) {
    for r in rows {
        let mut cells = vec![
            r.m.to_string(),
            r.trials.to_string(),
            r.failures.to_string(),
            fmt_f64(r.failure_rate),
            fmt_f64(r.stderr),
            fmt_f64(r.mean_test_error),
        ];
        if let Some(l) = label {
            cells.insert(0, l.to_string());
        }
        t.row(&cells);
    }
}

fn sample_complexity(dist: Distribution, c: &SampleComplexity, seed: u64) -> Result<(String, Value)> {
    let cfg = SampleComplexityConfig {
        epsilon: c.epsilon,
        gamma: c.gamma,
        delta: c.delta,
        algorithm: c.algorithm.clone(),
        grid: c.m_grid.clone(),
        trials: c.trials,
        test_size: c.test_size,
        seed,
        mem: c.mem,
        l_star: c.l_star,
    };
    let report = estimate_sample_complexity(&dist, &cfg)?;
    let k = margin_adapted_dimension(&dist.spectrum()?, c.gamma)?;
    let t = complexity_table(&report.rows, None);
    Ok((t.out, json!({ "k_gamma": k, "report": report })))
}

/// `γ` at the given quantile of the exact `γ*` over `trials` draws of size
/// `m` on the calibration lane.
pub fn calibrate_gamma(dist: &Distribution, m: usize, q: f64, trials: usize, seed: u64) -> Result<f64> {
    if trials == 0 {
        return invalid("calibration_trials must be positive");
    }
    let stars = (0..trials)
        .into_par_iter()
        .map(|t| {
            min_shatter_margin(
                &dist.sample(m, &mut stream(seed, Lane::Calibrate, t as u64)).x,
                DEFAULT_ENUMERATION_CAP,
            )
        })
        .collect::<Result<Vec<f64>>>()?;
    let gamma = quantile(&stars, q);
    if !(gamma > 0.0) {
        return invalid(format!("calibrated gamma is {gamma}; samples of size {m} are not shattered"));
    }
    Ok(gamma)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AdversarialSummary {
    pub gamma: f64,
    pub trials: usize,
    /// Fraction of trials whose training and ghost samples were shattered.
    pub eta: f64,
    pub eta_stderr: f64,
    pub witness_fraction: f64,
    /// Fraction of trials with test error at least `threshold`.
    pub bad_fraction: f64,
    pub bad_stderr: f64,
    pub threshold: f64,
    /// `η/2 − 3·stderr`.
    pub required: f64,
}

/// Run `trials` adversarial rounds with `m/2` training points and
/// summarize. Returns the per-trial CSV and the summary.
#[allow(clippy::too_many_arguments)]
pub fn adversarial_rounds(
    dist: &Distribution,
    m: usize,
    gamma: f64,
    trials: usize,
    test_size: usize,
    threshold: f64,
    restarts: usize,
    mem: &MemConfig,
    seed: u64,
) -> Result<(String, AdversarialSummary)> {
    if m < 2 {
        return invalid("adversarial demo needs m >= 2");
    }
    if trials == 0 {
        return invalid("trials must be positive");
    }
    let fallback = Algorithm::Auto { restarts };
    let rows = (0..trials)
        .into_par_iter()
        .map(|t| adversarial_trial(dist, m / 2, gamma, test_size, &fallback, mem, seed, t as u64))
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(&["trial", "shattered", "chose_witness", "witness_judge_error", "test_error"]);
    for r in &rows {
        t.row(&[
            r.trial.to_string(),
            r.shattered.to_string(),
            r.chose_witness.to_string(),
            fmt_opt(r.witness_judge_error),
            fmt_f64(r.test_error),
        ]);
    }
    let n = trials as f64;
    let eta = rows.iter().filter(|r| r.shattered).count() as f64 / n;
    let bad = rows.iter().filter(|r| r.test_error >= threshold).count() as f64 / n;
    let bad_stderr = binomial_stderr(bad, trials);
    let summary = AdversarialSummary {
        gamma,
        trials,
        eta,
        eta_stderr: binomial_stderr(eta, trials),
        witness_fraction: rows.iter().filter(|r| r.chose_witness).count() as f64 / n,
        bad_fraction: bad,
        bad_stderr,
        threshold,
        required: eta / 2.0 - 3.0 * bad_stderr,
    };
    Ok((t.out, summary))
}

fn adversarial_demo(dist: Distribution, c: &mut AdversarialDemo, seed: u64) -> Result<(String, Value)> {
    let gamma = match c.gamma {
        Some(g) => g,
        None => calibrate_gamma(&dist, c.m, c.calibration_quantile, c.calibration_trials, seed)?,
    };
    c.gamma = Some(gamma);
    let (csv, s) = adversarial_rounds(&dist, c.m, gamma, c.trials, c.test_size, c.threshold, c.restarts, &c.mem, seed)?;
    let pass = s.bad_fraction >= s.required;
    Ok((csv, json!({ "summary": s, "lower_bound_holds": pass })))
}

fn example_l1l2(c: &ExampleL1l2) -> Result<(String, Value)> {
    nonempty("d_grid", &c.d_grid)?;
    c.marginal.validate()?;
    let s = c.marginal.second_moment();
    let mut t = Table::new(&["d", "k_gamma", "closed_form", "match", "lower_bound"]);
    let mut all = true;
    for &d in &c.d_grid {
        let k = margin_adapted_dimension(&CovarianceSpectrum::constant(d, s)?, c.gamma)?;
        let closed = (d as f64 * s / (s + c.gamma * c.gamma)).ceil() as usize;
        all &= k == closed;
        t.row(&[
            d.to_string(),
            k.to_string(),
            closed.to_string(),
            (k == closed).to_string(),
            fmt_f64(lower_bound_value(k, c.beta, c.c_lower)?),
        ]);
    }
    Ok((t.out, json!({ "all_match": all })))
}

fn example_mixture(c: &ExampleMixture) -> Result<(String, Value)> {
    nonempty("d_grid", &c.d_grid)?;
    nonempty("v_grid", &c.v_grid)?;
    let mut t = Table::new(&["d", "v", "gamma", "k_gamma", "closed_form", "match"]);
    let mut all = true;
    for &d in &c.d_grid {
        for &v in &c.v_grid {
            let k = mixture_gaussian_kgamma(d, v)?;
            let closed = (d as f64 / (1.0 + v * v / 4.0)).ceil() as usize;
            all &= k == closed;
            t.row(&[
                d.to_string(),
                fmt_f64(v),
                fmt_f64(v / 2.0),
                k.to_string(),
                closed.to_string(),
                (k == closed).to_string(),
            ]);
        }
    }
    Ok((t.out, json!({ "all_match": all })))
}

fn twins(c: &Twins, seed: u64) -> Result<(String, Value)> {
    nonempty("m_grid", &c.m_grid)?;
    let mem = MemConfig {
        slack: c.slack,
        ..MemConfig::default()
    };
    let curve = |twin: Twin| -> Result<crate::mem::SampleComplexityReport> {
        let dist = Distribution::Twin(TwinDistributionSpec::new(twin, c.d)?);
        estimate_sample_complexity(
            &dist,
            &SampleComplexityConfig {
                epsilon: c.epsilon,
                gamma: c.gamma,
                delta: c.delta,
                algorithm: Algorithm::Auto { restarts: c.restarts },
                grid: MGrid::List(c.m_grid.clone()),
                trials: c.trials,
                test_size: c.test_size,
                seed,
                mem,
                l_star: None,
            },
        )
    };
    let d_report = curve(Twin::D)?;
    let p_report = curve(Twin::P)?;
    let mut t = complexity_table(&d_report.rows, Some("D"));
    append_complexity(&mut t, &p_report.rows, Some("P"));
    let p = Distribution::Twin(TwinDistributionSpec::new(Twin::P, c.d)?);
    let (_, adv) = adversarial_rounds(
        &p,
        c.adversarial_m,
        c.gamma,
        c.trials,
        c.test_size,
        c.threshold,
        c.restarts,
        &mem,
        seed,
    )?;
    let log_bound = (1.0 / c.delta).log2().ceil() as usize;
    Ok((
        t.out,
        json!({
            "D": d_report,
            "P": p_report,
            "log2_bound": log_bound,
            "D_within_log2_bound": d_report.m_hat.is_some_and(|m| m <= log_bound),
            "P_adversarial": adv,
        }),
    ))
}

fn sandwich(c: &Sandwich) -> Result<(String, Value)> {
    nonempty("sigma_grid", &c.sigma_grid)?;
    nonempty("gamma_grid", &c.gamma_grid)?;
    nonempty("d_grid", &c.d_grid)?;
    let mut t = Table::new(&["sigma", "gamma", "d", "k_gamma", "m_critical", "holds"]);
    let mut all = true;
    for &sigma in &c.sigma_grid {
        for &gamma in &c.gamma_grid {
            for &d in &c.d_grid {
                let k = margin_adapted_dimension(&CovarianceSpectrum::constant(d, sigma * sigma)?, gamma)?;
                let m0 = critical_sample_size(sigma, gamma, d)?;
                let holds = 0.5 * k as f64 - 1.0 <= m0 && m0 <= k as f64 + 1.0;
                all &= holds;
                t.row(&[
                    fmt_f64(sigma),
                    fmt_f64(gamma),
                    d.to_string(),
                    k.to_string(),
                    fmt_f64(m0),
                    holds.to_string(),
                ]);
            }
        }
    }
    Ok((t.out, json!({ "all_hold": all })))
}

/// Standard Gaussian product spec with labels from the first coordinate.
pub fn gaussian_first_coordinate(d: usize) -> Result<Distribution> {
    let mut w = vec![0.0; d];
    w[0] = 1.0;
    Ok(Distribution::Product(ProductDistributionSpec::iid(
        Marginal::Gaussian { sigma: 1.0 },
        d,
        LabelRule::Linear { w_star: w },
    )?))
}
