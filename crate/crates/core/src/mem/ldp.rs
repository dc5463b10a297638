//! Minimum-norm hard-margin solver.
//!
//! `min ‖w‖ s.t. y_i⟨w, x_i⟩ ≥ h` is a least-distance program. It reduces to
//! the nonnegative least squares problem `min_{u ≥ 0} ‖E u − f‖` with
//! `E = [Z^T; h·1^T]`, `f = e_{d+1}`, where `Z` holds the signed rows. A zero
//! residual means the constraints are incompatible. Otherwise
//! `w = −r[..d] / r[d]`.

use nalgebra::{DMatrix, DVector};

/// Outcome of a hard-margin solve on a subset of constraints.
#[derive(Clone, Debug, PartialEq)]
pub enum HardMargin {
    /// Minimum-norm `w` and the NNLS multipliers, one per constraint.
    Solved { w: DVector<f64>, multipliers: DVector<f64> },
    /// No `w` satisfies all constraints. The multipliers certify it.
    Incompatible { multipliers: DVector<f64> },
}

impl HardMargin {
    pub fn multipliers(&self) -> &DVector<f64> {
        match self {
            HardMargin::Solved { multipliers, .. } | HardMargin::Incompatible { multipliers } => multipliers,
        }
    }
}

/// Lawson-Hanson active-set NNLS: `argmin_{x ≥ 0} ‖A x − b‖`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    if n == 0 {
        return x;
    }
    let scale = a.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(b.amax()).max(1.0);
    let tol = 1e-12 * scale * scale * (a.nrows().max(n) as f64);
    let mut passive = vec![false; n];
    let mut grad = a.tr_mul(&(b - a * &x));

    for _ in 0..(3 * n + 10) {
        let pick = (0..n)
            .filter(|&j| !passive[j] && grad[j] > tol)
            .max_by(|&i, &j| grad[i].total_cmp(&grad[j]));
        let Some(t) = pick else { break };
        passive[t] = true;
        loop {
            let z = passive_solve(a, b, &passive);
            if (0..n).all(|j| !passive[j] || z[j] > 0.0) {
                x = z;
                break;
            }
            let mut alpha = f64::INFINITY;
            for j in 0..n {
                if passive[j] && z[j] <= 0.0 {
                    alpha = alpha.min(x[j] / (x[j] - z[j]));
                }
            }
            x += (z - &x) * alpha;
            for j in 0..n {
                if passive[j] && x[j] <= tol {
                    passive[j] = false;
                    x[j] = 0.0;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
        grad = a.tr_mul(&(b - a * &x));
    }
    x
}

/// Unconstrained least squares on the passive columns, zero elsewhere.
fn passive_solve(a: &DMatrix<f64>, b: &DVector<f64>, passive: &[bool]) -> DVector<f64> {
    let cols: Vec<usize> = (0..a.ncols()).filter(|&j| passive[j]).collect();
    let sub = a.select_columns(&cols);
    let sol = sub
        .svd(true, true)
        .solve(b, 1e-13 * a.nrows().max(cols.len()) as f64)
        .unwrap_or_else(|_| DVector::zeros(cols.len()));
    let mut z = DVector::zeros(a.ncols());
    for (k, &j) in cols.iter().enumerate() {
        z[j] = sol[k];
    }
    z
}

/// Minimum-norm `w` with `⟨w, z_i⟩ ≥ h` for every row `z_i` of `signed`.
pub fn min_norm_hard_margin(signed: &DMatrix<f64>, h: f64) -> HardMargin {
    let (n, d) = signed.shape();
    if n == 0 {
        return HardMargin::Solved {
            w: DVector::zeros(d),
            multipliers: DVector::zeros(0),
        };
    }
    let mut e = DMatrix::zeros(d + 1, n);
    e.view_mut((0, 0), (d, n)).copy_from(&signed.transpose());
    e.row_mut(d).fill(h);
    let mut f = DVector::zeros(d + 1);
    f[d] = 1.0;
    let u = nnls(&e, &f);
    let r = &e * &u - &f;
    // r[d] = h·Σu − 1 is negative whenever the system is compatible
    if -r[d] < 1e-14 {
        return HardMargin::Incompatible { multipliers: u };
    }
    let w = -r.rows(0, d) / r[d];
    HardMargin::Solved {
        w: w.into_owned(),
        multipliers: u,
    }
}
