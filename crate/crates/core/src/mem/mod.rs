//! Margin-error minimization: empirical losses, an exact learner for small
//! samples, a greedy learner for larger ones, the adversarial construction
//! of the lower bound, and empirical sample-complexity curves.

mod adversarial;
mod complexity;
pub mod ldp;
mod learner;

use serde::Serialize;

use crate::linalg::{LabeledSample, LinearClassifier};

pub use adversarial::{adversarial_mem, adversarial_trial, AdversarialTrial};
pub use complexity::{estimate_sample_complexity, ComplexityRow, MGrid, SampleComplexityConfig, SampleComplexityReport};
pub use learner::{
    mem_fit, mem_fit_exact, mem_fit_heuristic, Algorithm, Certificate, LearnerReport, MemConfig, DEFAULT_EXACT_CAP, DEFAULT_SLACK,
};

/// An error count over a sample of size `total`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ErrorCount {
    pub errors: usize,
    pub total: usize,
}

impl ErrorCount {
    /// `errors / total`, with the empty sample counted as error-free.
    pub fn rate(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.errors as f64 / self.total as f64
        }
    }
}

fn count_at_or_below(h: &LinearClassifier, s: &LabeledSample, threshold: f64) -> ErrorCount {
    let errors = s.margins(h).iter().filter(|&&v| v <= threshold).count();
    ErrorCount { errors, total: s.len() }
}

/// `|{i : y_i⟨w, x_i⟩ ≤ γ}| / m`. Points exactly on the margin count.
pub fn margin_error(h: &LinearClassifier, s: &LabeledSample, gamma: f64) -> ErrorCount {
    count_at_or_below(h, s, gamma)
}

/// `|{i : y_i⟨w, x_i⟩ ≤ 0}| / m`.
pub fn misclassification_error(h: &LinearClassifier, s: &LabeledSample) -> ErrorCount {
    count_at_or_below(h, s, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SampleMatrix;
    use crate::rng::seeded;
    use nalgebra::DVector;
    use rand::Rng;

    fn sample(rows: &[Vec<f64>], y: &[f64]) -> LabeledSample {
        LabeledSample::new(SampleMatrix::from_rows(rows).unwrap(), y.to_vec()).unwrap()
    }

    #[test]
    fn zero_classifier_errs_everywhere() {
        let s = sample(&[vec![1.0, 2.0], vec![-3.0, 0.5]], &[1.0, -1.0]);
        let h = LinearClassifier::zero(2);
        assert_eq!(margin_error(&h, &s, 0.5), ErrorCount { errors: 2, total: 2 });
        assert_eq!(misclassification_error(&h, &s).rate(), 1.0);
    }

    #[test]
    fn separated_at_twice_the_margin() {
        let s = sample(&[vec![2.0, 0.0], vec![-2.0, 1.0]], &[1.0, -1.0]);
        let h = LinearClassifier::new(DVector::from_vec(vec![1.0, 0.0]));
        assert_eq!(margin_error(&h, &s, 1.0).errors, 0);
        assert_eq!(misclassification_error(&h, &s).errors, 0);
    }

    #[test]
    fn boundary_point_counts_as_margin_error() {
        let s = sample(&[vec![0.5, 0.0], vec![3.0, 0.0]], &[1.0, 1.0]);
        let h = LinearClassifier::new(DVector::from_vec(vec![1.0, 0.0]));
        assert_eq!(margin_error(&h, &s, 0.5), ErrorCount { errors: 1, total: 2 });
    }

    #[test]
    fn flipped_labels_complement_misclassification() {
        let mut rng = seeded(4);
        let rows: Vec<Vec<f64>> = (0..40).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let y: Vec<f64> = (0..40).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
        let s = sample(&rows, &y);
        let h = LinearClassifier::new(DVector::from_vec(vec![0.3, -0.7, 0.2]));
        let a = misclassification_error(&h, &s).errors;
        let b = misclassification_error(&h, &s.flipped()).errors;
        assert_eq!(a + b, 40);
    }
}
