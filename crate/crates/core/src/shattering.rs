//! γ-fat-shattering at the origin for homogeneous linear classifiers.
//!
//! A set with matrix `X` is γ-shattered at the origin iff `G = XX^T` is
//! invertible and `max_y y^T G^{-1} y ≤ γ^{-2}` over all sign vectors. The
//! maximisation is a binary quadratic program, so it is done by exhaustive
//! enumeration of the `2^{m-1}` labelings with `y_1 = +1` (the form is even
//! in `y`). Labelings are visited in Gray-code order so each step costs
//! `O(m)`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::linalg::{extreme_eigenvalues, is_invertible_gram, spd_inverse, LinearClassifier, SampleMatrix};
use crate::spectra::check_gamma;

/// Default largest `m` for which labelings are enumerated.
pub const DEFAULT_ENUMERATION_CAP: usize = 20;

/// Relative slack on `y^T G^{-1} y ≤ γ^{-2}` absorbing rounding at the boundary.
pub const QUADRATIC_FORM_TOL: f64 = 1e-12;

/// Top labeling bits that select a work chunk. Fixed, so the enumeration
/// order (and every reported tie-break) does not depend on the thread count.
const CHUNK_BITS: usize = 6;

/// Gray-code steps between full recomputations of `G^{-1}y`.
const REFRESH_EVERY: usize = 1 << 10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShatterCertificate {
    pub shattered: bool,
    /// Largest margin at which the set is shattered; 0 if `G` is singular.
    pub gamma_star: f64,
    pub lambda_min: f64,
    /// Maximising labeling of `y^T G^{-1} y` (empty when `G` is singular).
    pub certificate_y: Vec<i8>,
    pub max_quadratic_form: Option<f64>,
}

/// Smallest eigenvalue of `XX^T`, clamped at 0. When `m > d` the Gram
/// matrix is rank deficient and the answer is exactly 0.
pub fn lambda_min_gram(x: &SampleMatrix) -> f64 {
    if x.rows() > x.dim() {
        return 0.0;
    }
    extreme_eigenvalues(&x.gram()).0.max(0.0)
}

/// `λ_min(XX^T) ≥ mγ²`, which suffices for γ-shattering.
pub fn eigenvalue_sufficient_check(x: &SampleMatrix, gamma: f64) -> bool {
    let m = x.rows() as f64;
    lambda_min_gram(x) >= m * gamma * gamma
}

fn labeling(index: u64, m: usize) -> Vec<f64> {
    let mut y = vec![1.0; m];
    for (j, yj) in y.iter_mut().enumerate().skip(1) {
        if index >> (j - 1) & 1 == 1 {
            *yj = -1.0;
        }
    }
    y
}

fn quadratic_form(a: &DMatrix<f64>, y: &[f64]) -> f64 {
    let yv = DVector::from_column_slice(y);
    yv.dot(&(a * &yv))
}

/// Scan one chunk of labelings; returns `(q, index)` of its maximum.
fn scan_chunk(a: &DMatrix<f64>, m: usize, high: u64, low_bits: usize) -> (f64, u64) {
    let base = high << low_bits;
    let mut y = labeling(base, m);
    let mut v = a * DVector::from_column_slice(&y);
    let mut q = v.iter().zip(&y).map(|(vi, yi)| vi * yi).sum::<f64>();
    let mut best = (q, base);
    for i in 1..(1u64 << low_bits) {
        let j = i.trailing_zeros() as usize + 1;
        let gray = i ^ (i >> 1);
        let step = -2.0 * y[j];
        q += 2.0 * step * v[j] + step * step * a[(j, j)];
        y[j] = -y[j];
        if (i as usize).is_multiple_of(REFRESH_EVERY) {
            v = a * DVector::from_column_slice(&y);
            q = v.iter().zip(&y).map(|(vi, yi)| vi * yi).sum::<f64>();
        } else {
            v.axpy(step, &a.column(j), 1.0);
        }
        if q > best.0 {
            best = (q, base | gray);
        }
    }
    best
}

/// `max_y y^T A y` over `y ∈ {±1}^m` for symmetric `A`, with the maximiser.
pub fn max_sign_quadratic_form(a: &DMatrix<f64>) -> (f64, Vec<f64>) {
    let m = a.nrows();
    if m == 0 {
        return (0.0, Vec::new());
    }
    let free = m - 1;
    let chunk_bits = free.min(CHUNK_BITS);
    let low_bits = free - chunk_bits;
    let chunks: Vec<(f64, u64)> = (0..(1u64 << chunk_bits))
        .into_par_iter()
        .map(|high| scan_chunk(a, m, high, low_bits))
        .collect();
    let mut best = chunks[0];
    for c in &chunks[1..] {
        if c.0 > best.0 {
            best = *c;
        }
    }
    let y = labeling(best.1, m);
    // the incremental value may carry drift; report the direct evaluation
    (quadratic_form(a, &y), y)
}

fn check_cap(m: usize, cap: usize) -> Result<()> {
    if m > cap {
        Err(Error::EnumerationTooLarge { m, cap })
    } else {
        Ok(())
    }
}

/// Full shattering certificate at margin `gamma`.
pub fn shatter_certificate(x: &SampleMatrix, gamma: f64, cap: usize) -> Result<ShatterCertificate> {
    check_gamma(gamma)?;
    let mut cert = worst_labeling(x, cap)?;
    if let Some(q) = cert.max_quadratic_form {
        cert.shattered = q * gamma * gamma <= 1.0 + QUADRATIC_FORM_TOL;
    }
    Ok(cert)
}

/// Margin-free part of the certificate; `shattered` is left false.
fn worst_labeling(x: &SampleMatrix, cap: usize) -> Result<ShatterCertificate> {
    let m = x.rows();
    check_cap(m, cap)?;
    let singular = ShatterCertificate {
        shattered: false,
        gamma_star: 0.0,
        lambda_min: 0.0,
        certificate_y: Vec::new(),
        max_quadratic_form: None,
    };
    if m > x.dim() {
        return Ok(singular);
    }
    let g = x.gram();
    let (lo, hi) = extreme_eigenvalues(&g);
    if !is_invertible_gram(lo, hi) {
        return Ok(ShatterCertificate {
            lambda_min: lo.max(0.0),
            ..singular
        });
    }
    let inv = spd_inverse(&g)?;
    let (q, y) = max_sign_quadratic_form(&inv);
    Ok(ShatterCertificate {
        shattered: false,
        gamma_star: 1.0 / q.sqrt(),
        lambda_min: lo,
        certificate_y: y.iter().map(|v| if *v > 0.0 { 1 } else { -1 }).collect(),
        max_quadratic_form: Some(q),
    })
}

/// Exact test: is the row set of `x` γ-shattered at the origin by the unit
/// ball of linear classifiers? A singular Gram matrix gives `false`.
pub fn is_gamma_shattered_at_origin(x: &SampleMatrix, gamma: f64, cap: usize) -> Result<bool> {
    Ok(shatter_certificate(x, gamma, cap)?.shattered)
}

/// `γ* = (max_y y^T (XX^T)^{-1} y)^{-1/2}`, or 0 for a singular Gram matrix.
/// The set is γ-shattered exactly for `0 < γ ≤ γ*`.
pub fn min_shatter_margin(x: &SampleMatrix, cap: usize) -> Result<f64> {
    Ok(worst_labeling(x, cap)?.gamma_star)
}

/// Minimum-norm `w` with `Xw = γy`, namely `X^T (XX^T)^{-1} γy`.
pub fn exact_margin_witness(x: &SampleMatrix, y: &[f64], gamma: f64) -> Result<LinearClassifier> {
    check_gamma(gamma)?;
    if y.len() != x.rows() {
        return invalid(format!("{} labels for {} rows", y.len(), x.rows()));
    }
    if x.rows() > x.dim() {
        return Err(Error::SingularGram);
    }
    let g = x.gram();
    let (lo, hi) = extreme_eigenvalues(&g);
    if !is_invertible_gram(lo, hi) {
        return Err(Error::SingularGram);
    }
    let chol = g.cholesky().ok_or(Error::SingularGram)?;
    let rhs = DVector::from_iterator(y.len(), y.iter().map(|v| gamma * v));
    let alpha = chol.solve(&rhs);
    Ok(LinearClassifier::new(x.matrix().transpose() * alpha))
}
