//! Least squares over the probability simplex.
//!
//! Minimizes `‖A p − f‖²` subject to `p ≥ 0`, `Σ p = 1` with an active-set
//! method in the style of Lawson–Hanson. Each subproblem is an
//! equality-constrained least squares on the passive set, solved by
//! eliminating one variable and taking an SVD solve, which stays accurate for
//! the badly conditioned loss matrices at low efficiency.

use nalgebra::{DMatrix, DVector};

use crate::distribution::PhotonNumberDistribution;
use crate::error::{Error, Result};
use crate::transfer::DetectorTransfer;
use crate::MAX_TRUNCATION;

pub const MAX_ITERATIONS: usize = 100_000;

/// Constrained counterpart of [`super::invert_counts`]: never negative, sums to 1.
pub fn invert_counts_constrained(
    f: &[f64],
    efficiency: f64,
    dark_mean: f64,
    truncation: usize,
) -> Result<PhotonNumberDistribution> {
    if truncation > MAX_TRUNCATION {
        return Err(Error::TruncationTooLarge {
            truncation,
            cap: MAX_TRUNCATION,
        });
    }
    let t = DetectorTransfer::new(efficiency, dark_mean, truncation)?;
    let m = t.matrix();
    let n = m.dim();
    let a = DMatrix::from_fn(n, n, |i, j| m.get(i, j));
    let b = DVector::from_fn(n, |i, _| f.get(i).copied().unwrap_or(0.0));
    let x = simplex_least_squares(&a, &b)?;
    PhotonNumberDistribution::new(x.iter().copied().collect())
}

/// Solves `min ‖A x − b‖²` over `{x ≥ 0, Σ x = 1}`.
pub fn simplex_least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let n = a.ncols();
    assert_eq!(a.nrows(), b.len(), "dimension mismatch");
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "columns",
            value: 0.0,
            reason: "need at least one unknown",
        });
    }
    if let Some(i) = b.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index: i });
    }

    let scale = a.norm_squared().max(1.0) * b.norm().max(1.0);
    let tol = 1e-13 * scale;

    // Start at the best vertex of the simplex.
    let start = (0..n)
        .map(|j| (j, (a.column(j) - b).norm_squared()))
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .map(|(j, _)| j)
        .expect("n > 0");
    let mut x = DVector::zeros(n);
    x[start] = 1.0;
    let mut passive = vec![false; n];
    passive[start] = true;

    let mut iterations = 0;
    loop {
        let grad = a.transpose() * (a * &x - b);
        // On the passive set the gradient equals the multiplier at optimum;
        // Σx = 1 makes the x-weighted mean the right estimate of it.
        let level: f64 = (0..n).filter(|&i| passive[i]).map(|i| x[i] * grad[i]).sum();
        let entering = (0..n)
            .filter(|&i| !passive[i])
            .map(|i| (i, grad[i] - level))
            .min_by(|p, q| p.1.total_cmp(&q.1));
        let Some((j, _)) = entering.filter(|&(_, s)| s < -tol) else {
            break;
        };
        passive[j] = true;

        loop {
            iterations += 1;
            if iterations > MAX_ITERATIONS {
                return Err(Error::NotConverged { iterations });
            }
            let z = solve_on_passive(a, b, &passive);
            if (0..n).all(|i| !passive[i] || z[i] > 0.0) {
                x = z;
                break;
            }
            if z[j] <= 0.0 && x[j] == 0.0 {
                // The entering direction does not survive the exact solve:
                // the KKT point was already reached up to rounding.
                passive[j] = false;
                return Ok(finish(x));
            }
            let alpha = (0..n)
                .filter(|&i| passive[i] && z[i] <= 0.0)
                .map(|i| x[i] / (x[i] - z[i]))
                .fold(f64::INFINITY, f64::min);
            x += (&z - &x) * alpha;
            for i in 0..n {
                if passive[i] && x[i] <= 1e-15 {
                    passive[i] = false;
                    x[i] = 0.0;
                }
            }
        }
    }
    Ok(finish(x))
}

fn finish(mut x: DVector<f64>) -> DVector<f64> {
    x.iter_mut().for_each(|v| *v = v.max(0.0));
    let s = x.sum();
    x / s
}

/// Equality-constrained least squares restricted to the passive set.
fn solve_on_passive(a: &DMatrix<f64>, b: &DVector<f64>, passive: &[bool]) -> DVector<f64> {
    let idx: Vec<usize> = (0..passive.len()).filter(|&i| passive[i]).collect();
    let mut z = DVector::zeros(passive.len());
    let (&pivot, rest) = idx.split_last().expect("passive set is never empty");
    if rest.is_empty() {
        z[pivot] = 1.0;
        return z;
    }
    // x_pivot = 1 − Σ x_rest
    let a_pivot = a.column(pivot);
    let reduced = DMatrix::from_fn(a.nrows(), rest.len(), |r, c| a[(r, rest[c])] - a_pivot[r]);
    let rhs = b - a_pivot;
    let svd = reduced.svd(true, true);
    let eps = svd.singular_values.max() * 1e-14;
    let y = svd.solve(&rhs, eps).expect("U and V were computed");
    let mut sum = 0.0;
    for (k, &i) in rest.iter().enumerate() {
        z[i] = y[k];
        sum += y[k];
    }
    z[pivot] = 1.0 - sum;
    z
}
