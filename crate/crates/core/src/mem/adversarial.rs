//! The bad-but-optimal learner from the shattering lower bound.

use serde::Serialize;

use super::learner::{mem_fit, Algorithm, MemConfig};
use super::misclassification_error;
use crate::error::{Error, Result};
use crate::linalg::{LabeledSample, LinearClassifier, SampleMatrix};
use crate::rng::{stream, Lane};
use crate::shattering::{eigenvalue_sufficient_check, exact_margin_witness, is_gamma_shattered_at_origin, DEFAULT_ENUMERATION_CAP};
use crate::spectra::check_gamma;
use crate::subgauss::Distribution;

/// Shattering test that stays usable past the enumeration cap: the
/// eigenvalue check is tried first, and a larger set that fails it is
/// reported as not shattered.
fn shattered(x: &SampleMatrix, gamma: f64) -> Result<bool> {
    if eigenvalue_sufficient_check(x, gamma) {
        return Ok(true);
    }
    if x.rows() > DEFAULT_ENUMERATION_CAP {
        return Ok(false);
    }
    is_gamma_shattered_at_origin(x, gamma, DEFAULT_ENUMERATION_CAP)
}

/// `h₁`: the unit-norm direction of the exact-margin witness for labels
/// `y` on `S` and `−ỹ` on `S̃`. It has margin at least `γ` on `S` and
/// misclassifies all of `S̃`.
pub fn adversarial_mem(s: &LabeledSample, s_tilde: &LabeledSample, gamma: f64) -> Result<LinearClassifier> {
    check_gamma(gamma)?;
    let joint = s.concat(&s_tilde.flipped())?;
    if joint.is_empty() {
        return Ok(LinearClassifier::zero(joint.dim()));
    }
    if !shattered(&joint.x, gamma)? {
        return Err(Error::NotShattered { gamma });
    }
    let w = exact_margin_witness(&joint.x, &joint.y, gamma)?;
    let n = w.norm();
    Ok(LinearClassifier::new(w.w / n))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AdversarialTrial {
    pub trial: usize,
    /// Whether the training and ghost samples together were γ-shattered.
    pub shattered: bool,
    /// Whether the witness was returned instead of the honest learner.
    pub chose_witness: bool,
    /// Misclassification of the witness on the judging sample, when built.
    pub witness_judge_error: Option<f64>,
    /// Misclassification of the returned hypothesis on a fresh test sample.
    pub test_error: f64,
}

/// One round of the lower-bound pipeline on `half` training points.
///
/// A ghost sample of the same size is drawn. If the union is γ-shattered,
/// `h₁` fits the training sample with zero margin error and is returned
/// when its misclassification on an independent judging sample is at least
/// ½. Otherwise `fallback` is trained honestly. Lanes: training `Train`,
/// ghost `Ghost`, judge `Search`, test `Test`, all at stream `index`.
#[allow(clippy::too_many_arguments)]
pub fn adversarial_trial(
    dist: &Distribution,
    half: usize,
    gamma: f64,
    test_size: usize,
    fallback: &Algorithm,
    cfg: &MemConfig,
    seed: u64,
    index: u64,
) -> Result<AdversarialTrial> {
    check_gamma(gamma)?;
    let s = dist.sample(half, &mut stream(seed, Lane::Train, index));
    let ghost = dist.sample(half, &mut stream(seed, Lane::Ghost, index));
    let test = dist.sample(test_size, &mut stream(seed, Lane::Test, index));
    let joint = s.concat(&ghost)?;
    let is_shattered = !joint.is_empty() && shattered(&joint.x, gamma)?;

    let mut witness_judge_error = None;
    let mut chosen = None;
    if is_shattered {
        let h1 = adversarial_mem(&s, &ghost, gamma)?;
        let judge = dist.sample(test_size, &mut stream(seed, Lane::Search, index));
        let err = misclassification_error(&h1, &judge).rate();
        witness_judge_error = Some(err);
        if err >= 0.5 {
            chosen = Some(h1);
        }
    }
    let chose_witness = chosen.is_some();
    let h = match chosen {
        Some(h) => h,
        None => mem_fit(&s, gamma, fallback, cfg, index)?.w,
    };
    Ok(AdversarialTrial {
        trial: index as usize,
        shattered: is_shattered,
        chose_witness,
        witness_judge_error,
        test_error: misclassification_error(&h, &test).rate(),
    })
}
