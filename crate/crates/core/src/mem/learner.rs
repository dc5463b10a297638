//! Exact and greedy margin-error minimizers over the unit ball.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ldp::{min_norm_hard_margin, HardMargin};
use super::{margin_error, ErrorCount};
use crate::error::{invalid, Error, Result};
use crate::linalg::{LabeledSample, LinearClassifier};
use crate::rng::{stream, Lane};
use crate::spectra::check_gamma;

/// Relative margin slack `τ`: constraints are imposed at `γ(1 + τ)` so that a
/// zero-error certificate survives the non-strict `≤ γ` loss.
pub const DEFAULT_SLACK: f64 = 1e-6;
pub const DEFAULT_EXACT_CAP: usize = 16;
const NORM_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MemConfig {
    pub slack: f64,
    pub exact_cap: usize,
}

impl Default for MemConfig {
    fn default() -> Self {
        Self {
            slack: DEFAULT_SLACK,
            exact_cap: DEFAULT_EXACT_CAP,
        }
    }
}

impl MemConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.slack > -1.0 && self.slack.is_finite()) {
            return invalid(format!("slack must be finite and > -1, got {}", self.slack));
        }
        Ok(())
    }

    fn target(&self, gamma: f64) -> f64 {
        gamma * (1.0 + self.slack)
    }
}

/// Which learner produced a report.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Algorithm {
    Exact,
    Heuristic {
        #[serde(default = "default_restarts")]
        restarts: usize,
    },
    /// Exact up to the cap, heuristic beyond it.
    Auto {
        #[serde(default = "default_restarts")]
        restarts: usize,
    },
    /// The lower-bound construction: draws a ghost sample and returns the
    /// witness that misfits it whenever that witness is bad, otherwise
    /// falls back to `Auto`.
    Adversarial {
        #[serde(default = "default_restarts")]
        restarts: usize,
    },
}

fn default_restarts() -> usize {
    8
}

impl Algorithm {
    pub fn label(&self) -> String {
        match self {
            Algorithm::Exact => "exact".into(),
            Algorithm::Heuristic { restarts } => format!("heuristic(restarts={restarts})"),
            Algorithm::Auto { restarts } => format!("auto(restarts={restarts})"),
            Algorithm::Adversarial { restarts } => format!("adversarial(fallback=auto(restarts={restarts}))"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Certificate {
    /// Every smaller exclusion set was ruled out.
    Enumerated,
    /// Local search; no optimality claim.
    Heuristic,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LearnerReport {
    pub w: LinearClassifier,
    pub empirical_margin_error: ErrorCount,
    pub certificate: Certificate,
    /// Indices whose constraints the solver gave up on.
    pub excluded: Vec<usize>,
}

fn report(s: &LabeledSample, gamma: f64, w: DVector<f64>, certificate: Certificate, excluded: Vec<usize>) -> LearnerReport {
    let w = LinearClassifier::new(w).clipped_to_unit_ball();
    LearnerReport {
        empirical_margin_error: margin_error(&w, s, gamma),
        w,
        certificate,
        excluded,
    }
}

fn feasible(z: &DMatrix<f64>, keep: &[usize], target: f64) -> Option<DVector<f64>> {
    match min_norm_hard_margin(&z.select_rows(keep), target) {
        HardMargin::Solved { w, .. } if w.norm() <= 1.0 + NORM_TOL => Some(w),
        _ => None,
    }
}

/// Exact margin-error minimization for `m ≤ cfg.exact_cap`.
///
/// Exclusion sets are tried by increasing size, lexicographically within a
/// size; the first size admitting a unit-norm `w` with margin `γ(1 + τ)` on
/// the rest is optimal. Among those, the smallest `‖w‖` wins.
pub fn mem_fit_exact(s: &LabeledSample, gamma: f64, cfg: &MemConfig) -> Result<LearnerReport> {
    check_gamma(gamma)?;
    cfg.validate()?;
    let m = s.len();
    if m > cfg.exact_cap {
        return Err(Error::ExactCapExceeded { m, cap: cfg.exact_cap });
    }
    let z = s.signed_rows();
    let target = cfg.target(gamma);
    for k in 0..=m {
        let mut best: Option<(f64, Vec<usize>, DVector<f64>)> = None;
        for excluded in (0..m).combinations(k) {
            let keep: Vec<usize> = (0..m).filter(|i| !excluded.contains(i)).collect();
            if let Some(w) = feasible(&z, &keep, target) {
                let norm = w.norm();
                if best.as_ref().is_none_or(|b| norm < b.0) {
                    best = Some((norm, excluded, w));
                }
            }
        }
        if let Some((_, excluded, w)) = best {
            return Ok(report(s, gamma, w, Certificate::Enumerated, excluded));
        }
    }
    unreachable!("excluding every point leaves w = 0 feasible")
}

/// Greedy removal search. Each pass solves the min-norm problem on the
/// surviving constraints and drops the one with the largest multiplier until
/// a unit-norm solution exists. Restart 0 is deterministic; later restarts
/// pick uniformly among the two largest multipliers.
pub fn mem_fit_heuristic(s: &LabeledSample, gamma: f64, restarts: usize, seed: u64, cfg: &MemConfig) -> Result<LearnerReport> {
    check_gamma(gamma)?;
    cfg.validate()?;
    let z = s.signed_rows();
    let target = cfg.target(gamma);
    let mut best: Option<LearnerReport> = None;
    for r in 0..restarts.max(1) {
        let mut rng = stream(seed, Lane::Search, r as u64);
        let (w, excluded) = greedy(&z, target, (r > 0).then_some(&mut rng));
        let candidate = report(s, gamma, w, Certificate::Heuristic, excluded);
        let better = best.as_ref().is_none_or(|b| {
            let (ce, be) = (candidate.empirical_margin_error.errors, b.empirical_margin_error.errors);
            ce < be || (ce == be && candidate.w.norm() < b.w.norm())
        });
        if better {
            best = Some(candidate);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn greedy<R: Rng>(z: &DMatrix<f64>, target: f64, mut rng: Option<&mut R>) -> (DVector<f64>, Vec<usize>) {
    let mut active: Vec<usize> = (0..z.nrows()).collect();
    let mut excluded = Vec::new();
    loop {
        let solved = min_norm_hard_margin(&z.select_rows(&active), target);
        if let HardMargin::Solved { w, .. } = &solved {
            if w.norm() <= 1.0 + NORM_TOL {
                return (w.clone(), excluded);
            }
        }
        let u = solved.multipliers();
        let mut order: Vec<usize> = (0..active.len()).collect();
        order.sort_by(|&a, &b| u[b].total_cmp(&u[a]).then(a.cmp(&b)));
        let second = order.len() > 1 && rng.as_deref_mut().is_some_and(|r| r.random_bool(0.5));
        let pos = if second { order[1] } else { order[0] };
        excluded.push(active.remove(pos));
    }
}

/// Dispatch on `algorithm`. The adversarial pipeline needs a ghost sample
/// and is not a plain learner.
pub fn mem_fit(s: &LabeledSample, gamma: f64, algorithm: &Algorithm, cfg: &MemConfig, seed: u64) -> Result<LearnerReport> {
    match *algorithm {
        Algorithm::Exact => mem_fit_exact(s, gamma, cfg),
        Algorithm::Heuristic { restarts } => mem_fit_heuristic(s, gamma, restarts, seed, cfg),
        Algorithm::Auto { restarts } | Algorithm::Adversarial { restarts } => {
            if s.len() <= cfg.exact_cap {
                mem_fit_exact(s, gamma, cfg)
            } else {
                mem_fit_heuristic(s, gamma, restarts, seed, cfg)
            }
        }
    }
}
