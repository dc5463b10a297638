//! Covariance spectra and the margin-adapted dimension.
//!
//! A distribution enters this module only through the sorted eigenvalues of
//! its uncentered covariance `E[XX^T]`. The margin-adapted dimension at
//! margin `γ` is the smallest `k` for which the mass outside the top-`k`
//! eigendirections is at most `γ²k`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::linalg::{symmetric_eigenvalues_desc, SampleMatrix, EIGEN_CLAMP};

/// Eigenvalues `λ_1 ≥ … ≥ λ_d ≥ 0` of an uncentered covariance matrix.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CovarianceSpectrum {
    eigenvalues: Vec<f64>,
}

impl CovarianceSpectrum {
    /// Validates an already sorted spectrum.
    pub fn new(eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::InvalidSpectrum("spectrum is empty".into()));
        }
        for (i, v) in eigenvalues.iter().enumerate() {
            if !v.is_finite() || *v < 0.0 {
                return Err(Error::InvalidSpectrum(format!(
                    "entry {i} = {v} is not a finite non-negative number"
                )));
            }
        }
        if let Some(i) = eigenvalues.windows(2).position(|w| w[0] < w[1]) {
            return Err(Error::InvalidSpectrum(format!(
                "not sorted non-increasing at position {}: {} < {}",
                i + 1,
                eigenvalues[i],
                eigenvalues[i + 1]
            )));
        }
        Ok(Self { eigenvalues })
    }

    /// Sorts an arbitrary list of non-negative values.
    pub fn from_unsorted(mut values: Vec<f64>) -> Result<Self> {
        values.sort_by(|a, b| b.total_cmp(a));
        Self::new(values)
    }

    /// `d` copies of `value`.
    pub fn constant(d: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; d])
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `E‖X‖²`.
    pub fn trace(&self) -> f64 {
        self.eigenvalues.iter().rev().sum()
    }

    pub fn largest(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// `tails[k] = Σ_{i>k} λ_i` (1-based), for `k = 0..=d`. Summed from the
    /// small end so long flat tails do not lose precision.
    fn tail_sums(&self) -> Vec<f64> {
        let d = self.dim();
        let mut tails = vec![0.0; d + 1];
        for k in (0..d).rev() {
            tails[k] = tails[k + 1] + self.eigenvalues[k];
        }
        tails
    }

    /// Mass left outside the top-`k` eigendirections.
    pub fn tail_sum(&self, k: usize) -> f64 {
        self.eigenvalues[k.min(self.dim())..].iter().rev().sum()
    }
}

/// Margin, excess error and confidence of a learning problem.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MarginParams {
    pub gamma: f64,
    pub epsilon: f64,
    pub delta: f64,
}

impl MarginParams {
    pub fn new(gamma: f64, epsilon: f64, delta: f64) -> Result<Self> {
        check_gamma(gamma)?;
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return invalid(format!("epsilon must lie in (0,1), got {epsilon}"));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return invalid(format!("delta must lie in (0,1), got {delta}"));
        }
        Ok(Self { gamma, epsilon, delta })
    }
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        invalid(format!("gamma must be a positive finite number, got {gamma}"))
    }
}

/// Slack on tail-sum comparisons, relative to the trace. Decimal spectra such
/// as a thousand copies of `0.001` do not sum exactly to their real value.
pub const TAIL_TOL: f64 = 1e-12;

/// `k_γ = min{k ∈ 0..=d : Σ_{i>k} λ_i ≤ γ²k}`. The boundary case counts as
/// satisfied, up to [`TAIL_TOL`].
pub fn margin_adapted_dimension(spectrum: &CovarianceSpectrum, gamma: f64) -> Result<usize> {
    check_gamma(gamma)?;
    let g2 = gamma * gamma;
    let tails = spectrum.tail_sums();
    let slack = TAIL_TOL * tails[0];
    // k = d always qualifies because the tail is empty
    Ok((0..=spectrum.dim())
        .find(|&k| tails[k] <= g2 * k as f64 + slack)
        .unwrap_or(spectrum.dim()))
}

/// Whether the spectrum's distribution is `(b, k)`-limited. The best
/// codimension-`k` subspace drops the top `k` eigendirections, so the test
/// reduces to a tail sum.
pub fn is_bk_limited(spectrum: &CovarianceSpectrum, b: f64, k: usize) -> Result<bool> {
    if k > spectrum.dim() {
        return invalid(format!("k = {k} exceeds the dimension {}", spectrum.dim()));
    }
    if !(b >= 0.0) {
        return invalid(format!("b must be non-negative, got {b}"));
    }
    Ok(spectrum.tail_sum(k) <= b + TAIL_TOL * spectrum.trace())
}

/// `(1/m) X^T X` and its spectrum. Eigenvalues below `1e-12·λ_1` (including
/// rounding negatives) are clamped to zero.
pub fn empirical_uncentered_covariance(sample: &SampleMatrix) -> Result<(DMatrix<f64>, CovarianceSpectrum)> {
    let m = sample.rows();
    if m == 0 {
        return invalid("empty sample");
    }
    let x = sample.matrix();
    let mut cov = x.transpose() * x;
    cov /= m as f64;
    let ev = symmetric_eigenvalues_desc(&cov);
    let top = ev[0].max(0.0);
    let clamped = ev.into_iter().map(|v| if v < EIGEN_CLAMP * top { 0.0 } else { v }).collect();
    Ok((cov, CovarianceSpectrum::new(clamped)?))
}

/// Uncentered spectrum of the two-Gaussian mixture `X | Y=y ~ N(y·v·e_1, I_d)`:
/// `v² + 1` followed by `d − 1` ones.
pub fn mixture_gaussian_spectrum(d: usize, v: f64) -> Result<CovarianceSpectrum> {
    if d == 0 {
        return invalid("d must be at least 1");
    }
    if !(v > 0.0 && v.is_finite()) {
        return invalid(format!("v must be positive, got {v}"));
    }
    let mut ev = vec![1.0; d];
    ev[0] = v * v + 1.0;
    CovarianceSpectrum::new(ev)
}

/// `k_{v/2}` of the Gaussian mixture, via the general scan.
pub fn mixture_gaussian_kgamma(d: usize, v: f64) -> Result<usize> {
    margin_adapted_dimension(&mixture_gaussian_spectrum(d, v)?, v / 2.0)
}

/// Diagnostics printed next to `k_γ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KGammaSummary {
    pub k_gamma: usize,
    pub d: usize,
    pub trace: f64,
    pub gamma: f64,
    /// `min(d, ⌈trace/γ²⌉)`.
    pub min_bound: usize,
    pub min_bound_check: bool,
}

pub fn summarize(spectrum: &CovarianceSpectrum, gamma: f64) -> Result<KGammaSummary> {
    let k_gamma = margin_adapted_dimension(spectrum, gamma)?;
    let trace = spectrum.trace();
    let norm_side = (trace / (gamma * gamma)).ceil();
    let min_bound = if norm_side >= spectrum.dim() as f64 {
        spectrum.dim()
    } else {
        norm_side as usize
    };
    Ok(KGammaSummary {
        k_gamma,
        d: spectrum.dim(),
        trace,
        gamma,
        min_bound,
        min_bound_check: k_gamma <= min_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force_kgamma(ev: &[f64], gamma: f64) -> usize {
        let slack = TAIL_TOL * ev.iter().sum::<f64>();
        (0..=ev.len())
            .find(|&k| ev[k..].iter().sum::<f64>() <= gamma * gamma * k as f64 + slack)
            .unwrap()
    }

    #[test]
    fn spike_spectrum() {
        let mut ev = vec![0.001; 1001];
        ev[0] = 1000.0;
        let s = CovarianceSpectrum::new(ev).unwrap();
        assert_eq!(margin_adapted_dimension(&s, 1.0).unwrap(), 1);
        assert!((s.trace() - 1001.0).abs() < 1e-9);
    }

    #[test]
    fn zero_spectrum() {
        let s = CovarianceSpectrum::constant(7, 0.0).unwrap();
        for g in [1e-3, 1.0, 50.0] {
            assert_eq!(margin_adapted_dimension(&s, g).unwrap(), 0);
        }
    }

    #[test]
    fn half_spectrum_d9() {
        let mut ev = vec![0.5; 9];
        ev[0] = 1.0;
        let s = CovarianceSpectrum::new(ev.clone()).unwrap();
        assert_eq!(brute_force_kgamma(&ev, 1.0), 3);
        assert_eq!(margin_adapted_dimension(&s, 1.0).unwrap(), 3);
    }

    #[test]
    fn unit_coordinates() {
        for d in 1..=50 {
            let s = CovarianceSpectrum::constant(d, 1.0).unwrap();
            assert_eq!(margin_adapted_dimension(&s, 1.0).unwrap(), d.div_ceil(2));
        }
    }

    #[test]
    fn rejects_invalid_spectra() {
        assert!(CovarianceSpectrum::new(vec![1.0, 2.0]).is_err());
        assert!(CovarianceSpectrum::new(vec![1.0, -0.1]).is_err());
        assert!(CovarianceSpectrum::new(vec![]).is_err());
        assert!(CovarianceSpectrum::new(vec![f64::NAN]).is_err());
        let s = CovarianceSpectrum::constant(2, 1.0).unwrap();
        assert!(margin_adapted_dimension(&s, 0.0).is_err());
        assert!(margin_adapted_dimension(&s, -1.0).is_err());
    }

    #[test]
    fn bk_limited_examples() {
        let s = CovarianceSpectrum::new(vec![4.0, 1.0, 1.0]).unwrap();
        assert!(is_bk_limited(&s, 2.0, 1).unwrap());
        assert!(!is_bk_limited(&s, 1.9, 1).unwrap());
        assert!(is_bk_limited(&s, 0.0, 3).unwrap());
        assert!(is_bk_limited(&s, 0.0, 4).is_err());
    }

    #[test]
    fn covariance_of_basis_rows() {
        let x = SampleMatrix::from_rows(&vec![vec![1.0, 0.0, 0.0]; 5]).unwrap();
        let (_, s) = empirical_uncentered_covariance(&x).unwrap();
        assert_eq!(s.eigenvalues(), &[1.0, 0.0, 0.0]);
        let x = SampleMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let (c, s) = empirical_uncentered_covariance(&x).unwrap();
        assert_eq!(c, DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5]));
        assert_eq!(s.eigenvalues(), &[0.5, 0.5]);
        assert!(empirical_uncentered_covariance(&SampleMatrix::empty(2)).is_err());
    }

    #[test]
    fn mixture_examples() {
        assert_eq!(mixture_gaussian_kgamma(100, 4.0).unwrap(), 20);
        assert_eq!(mixture_gaussian_kgamma(5, 0.01).unwrap(), 5);
        let ev = mixture_gaussian_spectrum(100, 2.0).unwrap();
        assert_eq!(brute_force_kgamma(ev.eigenvalues(), 1.0), 50);
        assert_eq!(mixture_gaussian_kgamma(100, 2.0).unwrap(), 50);
    }

    #[test]
    fn summary_reports_ceiling_bound() {
        let s = CovarianceSpectrum::new(vec![0.3, 0.1]).unwrap();
        let sum = summarize(&s, 1.0).unwrap();
        assert_eq!(sum.k_gamma, 1);
        assert_eq!(sum.min_bound, 1);
        assert!(sum.min_bound_check);
    }

    fn spectrum_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..10.0, 1..40).prop_map(|mut v| {
            v.sort_by(|a, b| b.total_cmp(a));
            v
        })
    }

    proptest! {
        #[test]
        fn matches_brute_force(ev in spectrum_strategy(), gamma in 0.05f64..5.0) {
            let s = CovarianceSpectrum::new(ev.clone()).unwrap();
            prop_assert_eq!(margin_adapted_dimension(&s, gamma).unwrap(), brute_force_kgamma(&ev, gamma));
        }

        #[test]
        fn monotone_in_gamma(ev in spectrum_strategy(), g1 in 0.05f64..5.0, g2 in 0.05f64..5.0) {
            let s = CovarianceSpectrum::new(ev).unwrap();
            let (lo, hi) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
            prop_assert!(margin_adapted_dimension(&s, lo).unwrap() >= margin_adapted_dimension(&s, hi).unwrap());
        }

        #[test]
        fn below_ceiling_sandwich(ev in spectrum_strategy(), gamma in 0.05f64..5.0) {
            let s = CovarianceSpectrum::new(ev).unwrap();
            let sum = summarize(&s, gamma).unwrap();
            prop_assert!(sum.min_bound_check);
        }

        #[test]
        fn scale_equivariant(ev in spectrum_strategy(), gamma in 0.05f64..5.0, c in prop::sample::select(vec![0.25f64, 0.5, 2.0, 4.0])) {
            // powers of two keep the rescaling exact
            let s = CovarianceSpectrum::new(ev.clone()).unwrap();
            let scaled = CovarianceSpectrum::new(ev.iter().map(|v| v * c * c).collect()).unwrap();
            prop_assert_eq!(margin_adapted_dimension(&s, gamma).unwrap(), margin_adapted_dimension(&scaled, c * gamma).unwrap());
        }

        #[test]
        fn consistent_with_bk_limited(ev in spectrum_strategy(), gamma in 0.05f64..5.0) {
            let s = CovarianceSpectrum::new(ev).unwrap();
            let via_bk = (0..=s.dim()).find(|&k| is_bk_limited(&s, gamma * gamma * k as f64, k).unwrap()).unwrap();
            prop_assert_eq!(margin_adapted_dimension(&s, gamma).unwrap(), via_bk);
        }
    }
}
