//! Property tests for invariants that cut across modules.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

use kgamma::mem::{adversarial_mem, margin_error, mem_fit_exact, misclassification_error, MemConfig, DEFAULT_SLACK};
use kgamma::rng::{seeded, stream, Lane};
use kgamma::shattering::{eigenvalue_sufficient_check, is_gamma_shattered_at_origin, max_sign_quadratic_form, min_shatter_margin};
use kgamma::subgauss::{LabelRule, Marginal, ProductDistributionSpec};
use kgamma::{LabeledSample, LinearClassifier, SampleMatrix};

fn matrix(m: usize, d: usize, seed: u64, scale: f64) -> SampleMatrix {
    let mut rng = seeded(seed);
    SampleMatrix::new(DMatrix::from_fn(m, d, |_, _| scale * rng.sample::<f64, _>(StandardNormal))).unwrap()
}

fn labels(m: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream(seed, Lane::Reference, 1);
    (0..m).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect()
}

/// Smallest number of violated constraints over every active-set
/// interpolant `w_A = pinv(Z_A)·h` with `‖w_A‖ ≤ 1`. The minimum-norm
/// solution of any constraint subset is one of these.
fn brute_force_mem(s: &LabeledSample, target: f64) -> usize {
    let z = s.signed_rows();
    let m = s.len();
    let mut best = m;
    for bits in 0u32..1 << m {
        let active: Vec<usize> = (0..m).filter(|i| bits >> i & 1 == 1).collect();
        let w = if active.is_empty() {
            DVector::zeros(s.dim())
        } else {
            let za = z.select_rows(&active);
            let h = DVector::from_element(active.len(), target);
            let w = za.clone().svd(true, true).solve(&h, 1e-12).unwrap();
            if (&za * &w - &h).norm() > 1e-9 {
                continue;
            }
            w
        };
        if w.norm() > 1.0 + 1e-12 {
            continue;
        }
        let violated = (&z * &w).iter().filter(|&&v| v < target - 1e-9).count();
        best = best.min(violated);
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shattering_is_monotone(m in 1usize..8, d in 1usize..10, seed in any::<u64>(), scale in 0.3f64..3.0, frac in 0.1f64..1.0) {
        let x = matrix(m, d, seed, scale);
        let star = min_shatter_margin(&x, 20).unwrap();
        prop_assume!(star > 0.0);
        let gamma = star * frac;
        prop_assert!(is_gamma_shattered_at_origin(&x, gamma, 20).unwrap());
        for drop in 0..m {
            let keep: Vec<usize> = (0..m).filter(|&i| i != drop).collect();
            if !keep.is_empty() {
                prop_assert!(is_gamma_shattered_at_origin(&x.select_rows(&keep), gamma, 20).unwrap());
            }
        }
    }

    #[test]
    fn shatter_margin_scales(m in 1usize..8, d in 1usize..10, seed in any::<u64>(), c in 0.1f64..10.0) {
        let x = matrix(m, d, seed, 1.0);
        let a = min_shatter_margin(&x, 20).unwrap();
        let b = min_shatter_margin(&x.scaled(c), 20).unwrap();
        prop_assert!((b - c * a).abs() <= 1e-9 * (c * a).max(1e-12), "{} vs {}", b, c * a);
    }

    #[test]
    fn eigen_check_implies_exact(m in 1usize..10, d in 1usize..14, seed in any::<u64>(), frac in 0.3f64..1.0) {
        let x = matrix(m, d, seed, 1.0);
        let lmin = kgamma::shattering::lambda_min_gram(&x);
        prop_assume!(lmin > 0.0);
        let gamma = (lmin / m as f64).sqrt() * frac;
        prop_assert!(eigenvalue_sufficient_check(&x, gamma));
        prop_assert!(is_gamma_shattered_at_origin(&x, gamma, 20).unwrap());
    }

    #[test]
    fn exact_mem_matches_brute_force(m in 1usize..8, d in 1usize..4, seed in any::<u64>(), gamma in 0.05f64..1.5) {
        let s = LabeledSample::new(matrix(m, d, seed, 1.0), labels(m, seed)).unwrap();
        let r = mem_fit_exact(&s, gamma, &MemConfig::default()).unwrap();
        let oracle = brute_force_mem(&s, gamma * (1.0 + DEFAULT_SLACK));
        prop_assert_eq!(r.excluded.len(), oracle);
        prop_assert!(r.empirical_margin_error.errors <= oracle);
        prop_assert!(r.w.norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn adversarial_witness_fits_and_flips(half in 1usize..5, extra in 0usize..6, seed in any::<u64>(), frac in 0.2f64..0.99) {
        let m = 2 * half;
        let x = matrix(m, m + extra, seed, 1.0);
        let star = min_shatter_margin(&x, 20).unwrap();
        prop_assume!(star > 0.0);
        let gamma = star * frac;
        let y = labels(m, seed);
        let all = LabeledSample::new(x, y).unwrap();
        let s = all.subset(&(0..half).collect::<Vec<_>>());
        let t = all.subset(&(half..m).collect::<Vec<_>>());
        let h = adversarial_mem(&s, &t, gamma).unwrap();
        prop_assert!(h.norm() <= 1.0 + 1e-12);
        prop_assert_eq!(margin_error(&h, &s, gamma).errors, 0);
        prop_assert_eq!(misclassification_error(&h, &t).rate(), 1.0);
    }
}

#[test]
fn exact_mem_resists_random_directions() {
    let mut rng = seeded(77);
    for trial in 0..6 {
        let m = 10;
        let s = LabeledSample::new(matrix(m, 3, 500 + trial, 1.0), labels(m, 500 + trial)).unwrap();
        let gamma = 0.3;
        let best = mem_fit_exact(&s, gamma, &MemConfig::default())
            .unwrap()
            .empirical_margin_error
            .errors;
        for _ in 0..10_000 {
            let mut w = DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal));
            w /= w.norm();
            let h = LinearClassifier::new(w * rng.random::<f64>().sqrt());
            assert!(margin_error(&h, &s, gamma).errors >= best);
        }
    }
}

#[test]
fn enumeration_is_thread_count_independent() {
    let x = matrix(16, 20, 3, 1.0);
    let g = kgamma::linalg::spd_inverse(&x.gram()).unwrap();
    let run = |n| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .unwrap()
            .install(|| max_sign_quadratic_form(&g))
    };
    let (q1, y1) = run(1);
    let (q4, y4) = run(4);
    assert_eq!(q1.to_bits(), q4.to_bits());
    assert_eq!(y1, y4);
}

#[test]
fn product_samples_are_deterministic_and_centered() {
    let spec = ProductDistributionSpec::iid(Marginal::UniformInterval { b: 2.0 }, 4, LabelRule::default()).unwrap();
    let a = spec.sample(50_000, &mut stream(1, Lane::Train, 0));
    let b = spec.sample(50_000, &mut stream(1, Lane::Train, 0));
    assert_eq!(a, b);
    let sd = (4.0f64 / 3.0).sqrt();
    for j in 0..4 {
        let mean = a.x.matrix().column(j).mean();
        assert!(mean.abs() <= 4.0 * sd / (50_000f64).sqrt(), "column {j} mean {mean}");
    }
}
