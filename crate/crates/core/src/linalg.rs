//! Sample matrices, classifiers and the handful of dense kernels shared by
//! the rest of the crate.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};

/// Eigenvalues below this fraction of the largest one are clamped to zero.
pub const EIGEN_CLAMP: f64 = 1e-12;

/// `XX^T` counts as invertible iff `λ_min > INVERTIBLE_GAP · max(1, λ_max)`.
pub const INVERTIBLE_GAP: f64 = 1e-10;

/// An `m × d` data matrix; row `i` is the point `x_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleMatrix {
    data: DMatrix<f64>,
}

impl SampleMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return invalid(format!("sample matrix must be at least 1x1, got {}x{}", data.nrows(), data.ncols()));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return invalid(format!("non-finite entry {bad} in sample matrix"));
        }
        Ok(Self { data })
    }

    /// Zero-row matrix in dimension `d`, used only for the degenerate
    /// `m = 0` training sample.
    pub fn empty(d: usize) -> Self {
        Self {
            data: DMatrix::zeros(0, d),
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != d) {
            return invalid(format!("row {i} has {} entries, expected {d}", r.len()));
        }
        Self::new(DMatrix::from_fn(m, d, |i, j| rows[i][j]))
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> DVector<f64> {
        self.data.row(i).transpose()
    }

    /// `XX^T`.
    pub fn gram(&self) -> DMatrix<f64> {
        &self.data * self.data.transpose()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { data: &self.data * c }
    }

    /// Rows `idx` in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        Self {
            data: self.data.select_rows(idx),
        }
    }

    /// Stack `self` on top of `other`.
    pub fn vstack(&self, other: &SampleMatrix) -> Result<Self> {
        if self.dim() != other.dim() {
            return invalid(format!("dimension mismatch: {} vs {}", self.dim(), other.dim()));
        }
        let (a, b) = (self.rows(), other.rows());
        let mut data = DMatrix::zeros(a + b, self.dim());
        data.rows_mut(0, a).copy_from(&self.data);
        data.rows_mut(a, b).copy_from(&other.data);
        Ok(Self { data })
    }
}

/// A homogeneous linear classifier `x ↦ ⟨w, x⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearClassifier {
    pub w: DVector<f64>,
}

impl LinearClassifier {
    pub fn new(w: DVector<f64>) -> Self {
        Self { w }
    }

    pub fn zero(d: usize) -> Self {
        Self { w: DVector::zeros(d) }
    }

    pub fn norm(&self) -> f64 {
        self.w.norm()
    }

    pub fn score(&self, x: &DVector<f64>) -> f64 {
        self.w.dot(x)
    }

    /// `Xw` for every row of `x`.
    pub fn scores(&self, x: &SampleMatrix) -> DVector<f64> {
        x.matrix() * &self.w
    }

    pub fn negated(&self) -> Self {
        Self { w: -&self.w }
    }

    pub fn as_slice(&self) -> &[f64] {
        self.w.as_slice()
    }

    /// Rescale onto the unit sphere if `‖w‖ > 1`.
    pub fn clipped_to_unit_ball(mut self) -> Self {
        let n = self.norm();
        if n > 1.0 {
            self.w /= n;
        }
        self
    }
}

impl serde::Serialize for LinearClassifier {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.w.iter())
    }
}

/// Labels are stored as `±1.0` so they multiply straight into margins.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSample {
    pub x: SampleMatrix,
    pub y: Vec<f64>,
}

impl LabeledSample {
    pub fn new(x: SampleMatrix, y: Vec<f64>) -> Result<Self> {
        if x.rows() != y.len() {
            return invalid(format!("{} rows but {} labels", x.rows(), y.len()));
        }
        if let Some(bad) = y.iter().find(|v| **v != 1.0 && **v != -1.0) {
            return invalid(format!("label {bad} is not ±1"));
        }
        Ok(Self { x, y })
    }

    pub fn empty(d: usize) -> Self {
        Self {
            x: SampleMatrix::empty(d),
            y: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.dim()
    }

    /// Rows `z_i = y_i x_i`.
    pub fn signed_rows(&self) -> DMatrix<f64> {
        let mut z = self.x.matrix().clone();
        for (i, yi) in self.y.iter().enumerate() {
            z.row_mut(i).scale_mut(*yi);
        }
        z
    }

    /// `y_i ⟨w, x_i⟩` for every example.
    pub fn margins(&self, h: &LinearClassifier) -> Vec<f64> {
        h.scores(&self.x).iter().zip(&self.y).map(|(s, y)| s * y).collect()
    }

    /// `self` followed by `other`.
    pub fn concat(&self, other: &LabeledSample) -> Result<Self> {
        let x = self.x.vstack(&other.x)?;
        Ok(Self {
            x,
            y: self.y.iter().chain(&other.y).copied().collect(),
        })
    }

    /// Same points with every label flipped.
    pub fn flipped(&self) -> Self {
        Self {
            x: self.x.clone(),
            y: self.y.iter().map(|v| -v).collect(),
        }
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            x: self.x.select_rows(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
        }
    }
}

/// Sign with `sign(0) = +1`.
pub fn sign(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Eigenvalues of a symmetric matrix, sorted non-increasing.
pub fn symmetric_eigenvalues_desc(a: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = a.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn extreme_eigenvalues(a: &DMatrix<f64>) -> (f64, f64) {
    let ev = a.clone().symmetric_eigenvalues();
    let lo = ev.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

pub fn is_invertible_gram(lambda_min: f64, lambda_max: f64) -> bool {
    lambda_min > INVERTIBLE_GAP * lambda_max.max(1.0)
}

/// Inverse of a symmetric positive-definite matrix via Cholesky.
pub fn spd_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = a.clone().cholesky().ok_or(Error::SingularGram)?;
    let mut inv = chol.inverse();
    // symmetrize away rounding so quadratic forms are order independent
    let n = inv.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (inv[(i, j)] + inv[(j, i)]);
            inv[(i, j)] = v;
            inv[(j, i)] = v;
        }
    }
    Ok(inv)
}

/// `‖A^T A − I‖_max`.
pub fn orthogonality_defect(a: &DMatrix<f64>) -> f64 {
    let g = a.transpose() * a;
    let n = g.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}
