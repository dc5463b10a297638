//! Closed-form sample-complexity bounds with explicit constants, the ramp
//! loss, and an empirical Rademacher estimate for the ramp class.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::linalg::{LabeledSample, LinearClassifier};
use crate::rng::{stream, Lane};
use crate::spectra::{check_gamma, margin_adapted_dimension, CovarianceSpectrum};
use crate::stats::mean_and_stderr;

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        invalid(format!("{name} must be positive and finite, got {v}"))
    }
}

fn unit_interval(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        invalid(format!("{name} must lie in (0,1), got {v}"))
    }
}

/// `C·B²/(γ²ε²)`.
pub fn norm_bound(b2: f64, gamma: f64, epsilon: f64, c: f64) -> Result<f64> {
    positive("B²", b2)?;
    check_gamma(gamma)?;
    positive("epsilon", epsilon)?;
    Ok(c * b2 / (gamma * gamma * epsilon * epsilon))
}

/// `C·d/ε²`.
pub fn dimension_bound(d: usize, epsilon: f64, c: f64) -> Result<f64> {
    positive("epsilon", epsilon)?;
    Ok(c * d as f64 / (epsilon * epsilon))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KGammaBound {
    pub m: u64,
    /// `√((C1·k·ln m + C2·ln(1/δ))/m)` at the returned `m`.
    pub value: f64,
    pub c1: f64,
    pub c2: f64,
}

/// Smallest `m ≥ 1` with `√((C1·k·ln m + C2·ln(1/δ))/m) ≤ ε`.
///
/// `f(m) = (a ln m + b)/m` rises until `m = e^{1 − b/a} ≤ e` and falls
/// afterwards, so `m = 1, 2` are checked directly and the rest is a
/// doubling search plus bisection on the decreasing part.
pub fn kgamma_upper_bound(k_gamma: usize, epsilon: f64, delta: f64, c1: f64, c2: f64) -> Result<KGammaBound> {
    positive("epsilon", epsilon)?;
    unit_interval("delta", delta)?;
    if !(c1 >= 0.0 && c2 >= 0.0) {
        return invalid("constants must be non-negative");
    }
    let a = c1 * k_gamma as f64;
    let b = c2 * (1.0 / delta).ln();
    let f = |m: u64| (a * (m as f64).ln() + b) / m as f64;
    let target = epsilon * epsilon;
    let done = |m: u64| {
        Ok(KGammaBound {
            m,
            value: f(m).sqrt(),
            c1,
            c2,
        })
    };
    for m in [1, 2] {
        if f(m) <= target {
            return done(m);
        }
    }
    let mut lo = 2u64;
    let mut hi = 3u64;
    while f(hi) > target {
        lo = hi;
        hi = hi
            .checked_mul(2)
            .ok_or_else(|| crate::Error::InvalidArgument("bound exceeds u64".into()))?;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if f(mid) <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    done(hi)
}

/// `max(β·k_γ − C, 0)`.
pub fn lower_bound_value(k_gamma: usize, beta: f64, c: f64) -> Result<f64> {
    positive("beta", beta)?;
    if !(c >= 0.0) {
        return invalid(format!("C must be non-negative, got {c}"));
    }
    Ok((beta * k_gamma as f64 - c).max(0.0))
}

/// `clip(1 − y⟨w,x⟩/γ, 0, 1)`.
pub fn ramp_loss(w: &LinearClassifier, x: &DVector<f64>, y: f64, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    Ok(ramp(y * w.score(x), gamma))
}

fn ramp(margin: f64, gamma: f64) -> f64 {
    (1.0 - margin / gamma).clamp(0.0, 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RademacherReport {
    /// Mean over sign draws of the best `|Σσ_i ramp_i|/m` found.
    pub lower_estimate: f64,
    pub stderr: f64,
    /// `√(B²/(γ²m))` with `B²` the empirical mean squared norm.
    pub analytic_upper: f64,
    /// `1/√m + 2√(B²/(γ²m))`: a valid bound for the absolute-value
    /// complexity, which includes the constant part of the ramp.
    pub offset_upper: f64,
    pub n_sigma: usize,
    pub restarts: usize,
}

const ASCENT_STEPS: usize = 200;

/// Empirical Rademacher complexity of the γ-ramp class on `S`, from below
/// by projected subgradient ascent and from above by the norm bounds. Every
/// evaluated `w` is feasible, so the estimate is a true lower bound per
/// sign draw. Draw `i` uses `Lane::Sigma` stream `i`.
pub fn rademacher_bounds(s: &LabeledSample, gamma: f64, n_sigma: usize, restarts: usize, seed: u64) -> Result<RademacherReport> {
    check_gamma(gamma)?;
    if n_sigma == 0 {
        return invalid("n_sigma must be at least 1");
    }
    let m = s.len();
    if m == 0 {
        return invalid("sample is empty");
    }
    let z = s.signed_rows();
    let d = s.dim();
    let values: Vec<f64> = (0..n_sigma)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, Lane::Sigma, i as u64);
            let sigma: Vec<f64> = (0..m).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
            let objective = |w: &DVector<f64>| -> f64 {
                let margins = &z * w;
                margins.iter().zip(&sigma).map(|(&t, s)| s * ramp(t, gamma)).sum::<f64>()
            };
            // w = 0 is always feasible: ramp ≡ 1
            let mut best = objective(&DVector::zeros(d)).abs();
            for _ in 0..restarts {
                let mut w = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
                w /= w.norm().max(f64::MIN_POSITIVE);
                w *= rng.random::<f64>();
                for sgn in [1.0, -1.0] {
                    let mut v = w.clone();
                    for step in 0..ASCENT_STEPS {
                        best = best.max(objective(&v).abs());
                        let margins = &z * &v;
                        let mut g = DVector::zeros(d);
                        for (j, &t) in margins.iter().enumerate() {
                            if t > 0.0 && t < gamma {
                                g -= z.row(j).transpose() * (sgn * sigma[j] / gamma);
                            }
                        }
                        let gn = g.norm();
                        if gn == 0.0 {
                            break;
                        }
                        v += g * (0.5 / ((step + 1) as f64).sqrt() / gn);
                        let n = v.norm();
                        if n > 1.0 {
                            v /= n;
                        }
                    }
                    best = best.max(objective(&v).abs());
                }
            }
            best / m as f64
        })
        .collect();
    let (mean, se) = mean_and_stderr(&values);
    let b2 = s.x.matrix().iter().map(|v| v * v).sum::<f64>() / m as f64;
    let analytic = (b2 / (gamma * gamma * m as f64)).sqrt();
    Ok(RademacherReport {
        lower_estimate: mean,
        stderr: se,
        analytic_upper: analytic,
        offset_upper: 1.0 / (m as f64).sqrt() + 2.0 * analytic,
        n_sigma,
        restarts,
    })
}

/// Explicit constants for every asymptotic bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundConstants {
    pub c_norm: f64,
    pub c_dim: f64,
    pub c1: f64,
    pub c2: f64,
    pub beta: f64,
    pub c_lower: f64,
}

impl Default for BoundConstants {
    fn default() -> Self {
        Self {
            c_norm: 1.0,
            c_dim: 1.0,
            c1: 1.0,
            c2: 1.0,
            beta: 1.0,
            c_lower: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundTable {
    pub gamma: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub d: usize,
    pub trace: f64,
    pub k_gamma: usize,
    pub norm_bound: f64,
    pub dimension_bound: f64,
    pub kgamma_bound: KGammaBound,
    pub lower_bound: f64,
    /// The two complexity terms of the refined upper bound, kept apart:
    /// `k_γ` and `B²/γ²`.
    pub k_term: f64,
    pub norm_term: f64,
    pub constants: BoundConstants,
}

/// All bounds for one spectrum, with `B² = trace`.
pub fn compare(spectrum: &CovarianceSpectrum, gamma: f64, epsilon: f64, delta: f64, constants: BoundConstants) -> Result<BoundTable> {
    unit_interval("epsilon", epsilon)?;
    let k = margin_adapted_dimension(spectrum, gamma)?;
    let trace = spectrum.trace();
    let norm = if trace > 0.0 {
        norm_bound(trace, gamma, epsilon, constants.c_norm)?
    } else {
        0.0
    };
    Ok(BoundTable {
        gamma,
        epsilon,
        delta,
        d: spectrum.dim(),
        trace,
        k_gamma: k,
        norm_bound: norm,
        dimension_bound: dimension_bound(spectrum.dim(), epsilon, constants.c_dim)?,
        kgamma_bound: kgamma_upper_bound(k, epsilon, delta, constants.c1, constants.c2)?,
        lower_bound: lower_bound_value(k, constants.beta, constants.c_lower)?,
        k_term: k as f64,
        norm_term: trace / (gamma * gamma),
        constants,
    })
}
