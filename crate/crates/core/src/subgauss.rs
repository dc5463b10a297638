//! Sub-Gaussian product distributions, the twin constructions with equal
//! covariance, the two-Gaussian mixture, and moment-inequality checks.
//!
//! Every sampler is a pure function of `(spec, m, rng)`; there is no global
//! generator.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{orthogonality_defect, sign, symmetric_eigenvalues_desc, LabeledSample, SampleMatrix};
use crate::rng::{stream, Lane};
use crate::spectra::{check_gamma, CovarianceSpectrum};

/// Monte Carlo size used when `ℓ*_γ` has to be estimated.
pub const L_STAR_SAMPLES: usize = 1_000_000;

/// Minimum number of trials for the squared-norm MGF check.
pub const MIN_MGF_TRIALS: usize = 10_000;

/// Law of one independent coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Marginal {
    Gaussian {
        sigma: f64,
    },
    /// Uniform on `{−b, +b}`.
    Rademacher {
        b: f64,
    },
    /// Uniform on `[−b, b]`.
    UniformInterval {
        b: f64,
    },
    Fixed {
        c: f64,
    },
}

impl Marginal {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Marginal::Gaussian { sigma: s } if !(s > 0.0 && s.is_finite()) => invalid(format!("gaussian sigma must be positive, got {s}")),
            Marginal::Rademacher { b } | Marginal::UniformInterval { b } if !(b > 0.0 && b.is_finite()) => {
                invalid(format!("scale b must be positive, got {b}"))
            }
            Marginal::Fixed { c } if !c.is_finite() => invalid(format!("fixed value must be finite, got {c}")),
            _ => Ok(()),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Marginal::Fixed { c } => c,
            _ => 0.0,
        }
    }

    /// `E[X²]`.
    pub fn second_moment(&self) -> f64 {
        match *self {
            Marginal::Gaussian { sigma } => sigma * sigma,
            Marginal::Rademacher { b } => b * b,
            Marginal::UniformInterval { b } => b * b / 3.0,
            Marginal::Fixed { c } => c * c,
        }
    }

    /// `ln E[exp(tX)]` in closed form.
    pub fn log_mgf(&self, t: f64) -> f64 {
        match *self {
            Marginal::Gaussian { sigma } => 0.5 * t * t * (sigma * sigma),
            Marginal::Rademacher { b } => ln_cosh(t * b),
            Marginal::UniformInterval { b } => ln_sinhc(t * b),
            Marginal::Fixed { c } => t * c,
        }
    }

    /// Relative moment of the family the marginal belongs to: Gaussians and
    /// symmetric two-point laws have 1, uniform intervals 3/2. A nonzero
    /// constant is not mean-zero and has none.
    pub fn relative_moment(&self) -> Option<f64> {
        match *self {
            Marginal::Gaussian { .. } | Marginal::Rademacher { .. } => Some(1.0),
            Marginal::UniformInterval { .. } => Some(1.5),
            Marginal::Fixed { c: 0.0 } => Some(1.0),
            Marginal::Fixed { .. } => None,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Marginal::Gaussian { sigma } => sigma * rng.sample::<f64, _>(StandardNormal),
            Marginal::Rademacher { b } => {
                if rng.random::<bool>() {
                    b
                } else {
                    -b
                }
            }
            Marginal::UniformInterval { b } => b * (2.0 * rng.random::<f64>() - 1.0),
            Marginal::Fixed { c } => c,
        }
    }
}

pub(crate) fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// `ln(sinh(x)/x)`.
pub(crate) fn ln_sinhc(x: f64) -> f64 {
    let a = x.abs();
    if a < 1e-4 {
        a * a / 6.0
    } else if a < 20.0 {
        (a.sinh() / a).ln()
    } else {
        a + (-(-2.0 * a).exp()).ln_1p() - std::f64::consts::LN_2 - a.ln()
    }
}

/// How labels are attached to points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LabelRule {
    /// `Y = sign(⟨w*, X⟩)` with `sign(0) = +1`.
    Linear {
        w_star: Vec<f64>,
    },
    Constant {
        value: f64,
    },
}

impl Default for LabelRule {
    fn default() -> Self {
        LabelRule::Constant { value: 1.0 }
    }
}

/// Independent coordinates `z_i` expressed in an orthonormal basis:
/// `X = A z`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductDistributionSpec {
    pub marginals: Vec<Marginal>,
    /// Columns are the basis vectors `a_i`; `None` is the identity.
    pub basis: Option<DMatrix<f64>>,
    pub label: LabelRule,
    /// Declared `ℓ*_γ`, if known analytically.
    pub l_star: Option<f64>,
}

impl ProductDistributionSpec {
    pub fn new(marginals: Vec<Marginal>, basis: Option<DMatrix<f64>>, label: LabelRule) -> Result<Self> {
        let spec = Self {
            marginals,
            basis,
            label,
            l_star: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `d` i.i.d. copies of one marginal, identity basis.
    pub fn iid(marginal: Marginal, d: usize, label: LabelRule) -> Result<Self> {
        Self::new(vec![marginal; d], None, label)
    }

    pub fn with_l_star(mut self, l_star: f64) -> Self {
        self.l_star = Some(l_star);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.marginals.len();
        if d == 0 {
            return invalid("at least one marginal is required");
        }
        for m in &self.marginals {
            m.validate()?;
        }
        if let Some(a) = &self.basis {
            if a.nrows() != d || a.ncols() != d {
                return invalid(format!("basis must be {d}x{d}, got {}x{}", a.nrows(), a.ncols()));
            }
            let defect = orthogonality_defect(a);
            if defect > 1e-10 {
                return invalid(format!("basis is not orthogonal: ‖A^T A − I‖ = {defect:e}"));
            }
        }
        match &self.label {
            LabelRule::Linear { w_star } => {
                if w_star.len() != d {
                    return invalid(format!("w_star has {} entries, expected {d}", w_star.len()));
                }
                let n = w_star.iter().map(|v| v * v).sum::<f64>().sqrt();
                if (n - 1.0).abs() > 1e-9 {
                    return invalid(format!("w_star must be a unit vector, norm is {n}"));
                }
            }
            LabelRule::Constant { value } if *value != 1.0 && *value != -1.0 => {
                return invalid(format!("constant label must be ±1, got {value}"));
            }
            LabelRule::Constant { .. } => {}
        }
        if let Some(l) = self.l_star {
            if !(0.0..=1.0).contains(&l) {
                return invalid(format!("l_star must lie in [0,1], got {l}"));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    /// Largest relative moment over the coordinates.
    pub fn relative_moment(&self) -> Result<f64> {
        self.marginals.iter().try_fold(0.0f64, |acc, m| {
            m.relative_moment()
                .map(|r| acc.max(r))
                .ok_or_else(|| Error::NotSubGaussian(format!("{m:?} has nonzero mean")))
        })
    }

    fn coordinates<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.marginals.iter().map(|m| m.sample(rng)))
    }

    fn label_of(&self, x: &DVector<f64>) -> f64 {
        match &self.label {
            LabelRule::Linear { w_star } => sign(x.iter().zip(w_star).map(|(a, b)| a * b).sum()),
            LabelRule::Constant { value } => *value,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> LabeledSample {
        let d = self.dim();
        let mut x = DMatrix::zeros(m, d);
        let mut y = Vec::with_capacity(m);
        for i in 0..m {
            let z = self.coordinates(rng);
            let row = match &self.basis {
                Some(a) => a * z,
                None => z,
            };
            y.push(self.label_of(&row));
            x.row_mut(i).copy_from(&row.transpose());
        }
        labeled(x, y, d)
    }

    /// Uncentered second-moment matrix `E[XX^T]`.
    pub fn second_moment_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mean = DVector::from_iterator(d, self.marginals.iter().map(Marginal::mean));
        let var = DVector::from_iterator(d, self.marginals.iter().map(|m| m.second_moment() - m.mean() * m.mean()));
        let z = DMatrix::from_diagonal(&var) + &mean * mean.transpose();
        match &self.basis {
            Some(a) => a * z * a.transpose(),
            None => z,
        }
    }

    pub fn spectrum(&self) -> Result<CovarianceSpectrum> {
        let all_centered = self.marginals.iter().all(|m| m.mean() == 0.0);
        let ev = if all_centered {
            self.marginals.iter().map(Marginal::second_moment).collect()
        } else {
            symmetric_eigenvalues_desc(&self.second_moment_matrix())
                .into_iter()
                .map(|v| v.max(0.0))
                .collect()
        };
        CovarianceSpectrum::from_unsorted(ev)
    }

    /// `ℓ*_γ = 0` when `w*` is a basis direction whose marginal is a two-point
    /// law at `±b` with `b > γ`.
    fn planted_margin(&self, gamma: f64) -> bool {
        let LabelRule::Linear { w_star } = &self.label else { return false };
        let w = DVector::from_column_slice(w_star);
        let coords = match &self.basis {
            Some(a) => a.transpose() * w,
            None => w,
        };
        let Some((j, _)) = coords.iter().enumerate().find(|(_, c)| c.abs() >= 1.0 - 1e-12) else {
            return false;
        };
        matches!(self.marginals[j], Marginal::Rademacher { b } if b > gamma)
    }
}

fn labeled(x: DMatrix<f64>, y: Vec<f64>, d: usize) -> LabeledSample {
    if x.nrows() == 0 {
        return LabeledSample::empty(d);
    }
    // entries and labels are finite ±1 by construction
    LabeledSample::new(SampleMatrix::new(x).expect("sampler produced finite entries"), y).expect("labels are ±1")
}

/// The two equal-covariance distributions with labels `Y = X[1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Twin {
    /// Balanced mixture of uniform `{±1}^d` and uniform `{±1}×{0}^{d−1}`.
    D,
    /// Uniform over `{±1}×{±1/√2}^{d−1}`.
    P,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwinDistributionSpec {
    pub twin: Twin,
    pub d: usize,
}

impl TwinDistributionSpec {
    pub fn new(twin: Twin, d: usize) -> Result<Self> {
        if d < 2 {
            return invalid(format!("twin distributions need d > 1, got {d}"));
        }
        Ok(Self { twin, d })
    }

    pub fn sample<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> LabeledSample {
        let d = self.d;
        let mut x = DMatrix::zeros(m, d);
        let mut y = Vec::with_capacity(m);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for i in 0..m {
            let first = if rng.random::<bool>() { 1.0 } else { -1.0 };
            x[(i, 0)] = first;
            match self.twin {
                Twin::D => {
                    let cube = rng.random::<bool>();
                    if cube {
                        for j in 1..d {
                            x[(i, j)] = if rng.random::<bool>() { 1.0 } else { -1.0 };
                        }
                    }
                }
                Twin::P => {
                    for j in 1..d {
                        x[(i, j)] = if rng.random::<bool>() { h } else { -h };
                    }
                }
            }
            y.push(first);
        }
        labeled(x, y, d)
    }

    /// `diag(1, ½, …, ½)` for both twins.
    pub fn spectrum(&self) -> Result<CovarianceSpectrum> {
        let mut ev = vec![0.5; self.d];
        ev[0] = 1.0;
        CovarianceSpectrum::new(ev)
    }

    /// `ln E[exp(t⟨u, X⟩)]` in closed form.
    pub fn log_mgf(&self, u: &[f64], t: f64) -> f64 {
        match self.twin {
            Twin::D => {
                let cube: f64 = u.iter().map(|ui| ln_cosh(t * ui)).sum();
                let axis = ln_cosh(t * u[0]);
                let (hi, lo) = if cube >= axis { (cube, axis) } else { (axis, cube) };
                hi + (0.5 * (1.0 + (lo - hi).exp())).ln()
            }
            Twin::P => {
                let h = std::f64::consts::FRAC_1_SQRT_2;
                ln_cosh(t * u[0]) + u[1..].iter().map(|ui| ln_cosh(t * ui * h)).sum::<f64>()
            }
        }
    }

    /// `E[⟨u, X⟩²]`.
    pub fn directional_second_moment(&self, u: &[f64]) -> f64 {
        let rest: f64 = u[1..].iter().map(|v| v * v).sum();
        match self.twin {
            Twin::D => 0.5 * ((u[0] * u[0] + rest) + u[0] * u[0]),
            Twin::P => u[0] * u[0] + 0.5 * rest,
        }
    }
}

/// `Y` uniform on `±1`, `X | Y=y ~ N(y·v·e_1, I_d)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub d: usize,
    pub v: f64,
}

impl MixtureSpec {
    pub fn new(d: usize, v: f64) -> Result<Self> {
        if d == 0 {
            return invalid("d must be at least 1");
        }
        if !(v > 0.0 && v.is_finite()) {
            return invalid(format!("v must be positive, got {v}"));
        }
        Ok(Self { d, v })
    }

    pub fn sample<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> LabeledSample {
        let mut x = DMatrix::zeros(m, self.d);
        let mut y = Vec::with_capacity(m);
        for i in 0..m {
            let label = if rng.random::<bool>() { 1.0 } else { -1.0 };
            for j in 0..self.d {
                x[(i, j)] = rng.sample::<f64, _>(StandardNormal);
            }
            x[(i, 0)] += label * self.v;
            y.push(label);
        }
        labeled(x, y, self.d)
    }
}

/// Any distribution the experiments can draw labeled samples from.
#[derive(Clone, Debug, PartialEq)]
pub enum Distribution {
    Product(ProductDistributionSpec),
    Twin(TwinDistributionSpec),
    Mixture(MixtureSpec),
}

impl Distribution {
    pub fn dim(&self) -> usize {
        match self {
            Distribution::Product(p) => p.dim(),
            Distribution::Twin(t) => t.d,
            Distribution::Mixture(g) => g.d,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> LabeledSample {
        match self {
            Distribution::Product(p) => p.sample(m, rng),
            Distribution::Twin(t) => t.sample(m, rng),
            Distribution::Mixture(g) => g.sample(m, rng),
        }
    }

    /// Spectrum of the uncentered covariance `E[XX^T]`.
    pub fn spectrum(&self) -> Result<CovarianceSpectrum> {
        match self {
            Distribution::Product(p) => p.spectrum(),
            Distribution::Twin(t) => t.spectrum(),
            Distribution::Mixture(g) => crate::spectra::mixture_gaussian_spectrum(g.d, g.v),
        }
    }

    /// `ℓ*_γ`: declared, analytic, or a `L_STAR_SAMPLES` Monte Carlo
    /// estimate of `ℓ_γ(w*)`.
    pub fn optimal_margin_error(&self, gamma: f64, seed: u64) -> Result<f64> {
        check_gamma(gamma)?;
        match self {
            Distribution::Product(p) => {
                if let Some(l) = p.l_star {
                    return Ok(l);
                }
                if p.planted_margin(gamma) {
                    return Ok(0.0);
                }
                let LabelRule::Linear { w_star } = &p.label else {
                    return invalid("l_star must be declared for constant-label specs");
                };
                let w = DVector::from_column_slice(w_star);
                Ok(monte_carlo_rate(seed, |rng| {
                    let s = p.sample(1, rng);
                    s.y[0] * s.x.row(0).dot(&w) <= gamma
                }))
            }
            Distribution::Twin(_) => {
                if gamma <= 1.0 {
                    // e_1 attains margin exactly 1 on every point
                    Ok(0.0)
                } else {
                    invalid("l_star of the twin distributions is only known for gamma <= 1")
                }
            }
            Distribution::Mixture(g) => {
                // y⟨e_1, x⟩ = v + y·n_1 with y·n_1 ~ N(0,1)
                let v = g.v;
                Ok(monte_carlo_rate(seed, |rng| v + rng.sample::<f64, _>(StandardNormal) <= gamma))
            }
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        crate::io::distribution_to_json(self)
    }
}

fn monte_carlo_rate(seed: u64, hit: impl Fn(&mut rand_chacha::ChaCha8Rng) -> bool + Sync) -> f64 {
    const BLOCK: usize = 1 << 14;
    let blocks = L_STAR_SAMPLES.div_ceil(BLOCK);
    let hits: usize = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream(seed, Lane::Reference, b as u64);
            let n = BLOCK.min(L_STAR_SAMPLES - b * BLOCK);
            (0..n).filter(|_| hit(&mut rng)).count()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    hits as f64 / L_STAR_SAMPLES as f64
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return invalid("t grid is empty");
    }
    if let Some(t) = t_grid.iter().find(|t| !t.is_finite()) {
        return invalid(format!("non-finite grid point {t}"));
    }
    Ok(())
}

fn mgf_bound_holds(log_mgf: f64, log_bound: f64) -> bool {
    log_mgf <= log_bound + 1e-12 * log_bound.abs().max(1.0)
}

/// `E[exp(tX)] ≤ exp(t²ρ²E[X²]/2)` at every grid point, closed form only.
pub fn verify_relative_moment(marginal: &Marginal, rho: f64, t_grid: &[f64]) -> Result<bool> {
    marginal.validate()?;
    check_grid(t_grid)?;
    if !(rho > 0.0) {
        return invalid(format!("rho must be positive, got {rho}"));
    }
    let s2 = marginal.second_moment();
    Ok(t_grid
        .iter()
        .all(|&t| mgf_bound_holds(marginal.log_mgf(t), 0.5 * t * t * (rho * rho * s2))))
}

/// Smallest `ρ` that passes on the grid: `max_t sqrt(2 ln M(t) / (t² E[X²]))`
/// over nonzero grid points.
pub fn tightest_relative_moment(marginal: &Marginal, t_grid: &[f64]) -> Result<f64> {
    marginal.validate()?;
    check_grid(t_grid)?;
    let s2 = marginal.second_moment();
    if s2 == 0.0 {
        return invalid("marginal has zero second moment");
    }
    Ok(t_grid
        .iter()
        .filter(|t| **t != 0.0)
        .map(|&t| (2.0 * marginal.log_mgf(t) / (t * t * s2)).max(0.0).sqrt())
        .fold(0.0, f64::max))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MgfReport {
    pub t: f64,
    pub t_max: f64,
    pub rho: f64,
    pub trace_b: f64,
    pub trials: usize,
    pub empirical_mgf: f64,
    pub stderr: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Monte Carlo check of `E[exp(t‖X‖²)] ≤ exp(2t·trace(B))` with moment matrix
/// `B = ρ²·diag(E[z_i²])`, for `0 < t ≤ 1/(4λ_max(B))`.
pub fn verify_squared_norm_mgf(spec: &ProductDistributionSpec, t: f64, trials: usize, seed: u64) -> Result<MgfReport> {
    spec.validate()?;
    let rho = spec.relative_moment()?;
    let moments: Vec<f64> = spec.marginals.iter().map(|m| rho * rho * m.second_moment()).collect();
    let lambda_max = moments.iter().copied().fold(0.0, f64::max);
    let trace_b: f64 = moments.iter().sum();
    let t_max = if lambda_max > 0.0 {
        1.0 / (4.0 * lambda_max)
    } else {
        f64::INFINITY
    };
    if !(t > 0.0 && t <= t_max) {
        return Err(Error::MgfRange { t, max: t_max });
    }
    if trials < MIN_MGF_TRIALS {
        return invalid(format!("need at least {MIN_MGF_TRIALS} trials, got {trials}"));
    }
    const BLOCK: usize = 1 << 12;
    let blocks = trials.div_ceil(BLOCK);
    let sums: Vec<(f64, f64)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream(seed, Lane::Train, b as u64);
            let n = BLOCK.min(trials - b * BLOCK);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..n {
                // the norm is basis independent, so the coordinates suffice
                let sq: f64 = spec.marginals.iter().map(|m| m.sample(&mut rng).powi(2)).sum();
                let v = (t * sq).exp();
                s += v;
                s2 += v * v;
            }
            (s, s2)
        })
        .collect();
    let (s, s2) = sums.iter().fold((0.0, 0.0), |acc, v| (acc.0 + v.0, acc.1 + v.1));
    let n = trials as f64;
    let mean = s / n;
    let var = (s2 / n - mean * mean).max(0.0) * n / (n - 1.0);
    let stderr = (var / n).sqrt();
    let bound = (2.0 * t * trace_b).exp();
    Ok(MgfReport {
        t,
        t_max,
        rho,
        trace_b,
        trials,
        empirical_mgf: mean,
        stderr,
        bound,
        pass: mean - 3.0 * stderr <= bound,
    })
}

/// Closed-form check that `⟨u, X⟩` is sub-Gaussian with relative moment
/// `√2` for a twin distribution:
/// `E[exp(t⟨u,X⟩)] ≤ exp(t²·2·E[⟨u,X⟩²]/2)` on the grid.
pub fn twin_subgaussian_direction_check(twin: Twin, d: usize, u: &[f64], t_grid: &[f64]) -> Result<bool> {
    let spec = TwinDistributionSpec::new(twin, d)?;
    check_grid(t_grid)?;
    if u.len() != d {
        return invalid(format!("direction has {} entries, expected {d}", u.len()));
    }
    let n = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (n - 1.0).abs() > 1e-9 {
        return invalid(format!("direction must be a unit vector, norm is {n}"));
    }
    let s2 = spec.directional_second_moment(u);
    Ok(t_grid.iter().all(|&t| mgf_bound_holds(spec.log_mgf(u, t), t * t * s2)))
}
