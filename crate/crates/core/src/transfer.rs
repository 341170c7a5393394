//! Transfer matrices between true and detected photon-number distributions.
//!
//! With `p` the true distribution and `f` the detected one, truncated at `N`:
//!
//! - binomial loss: `L[i][j] = C(j, i) η^i (1-η)^(j-i)` for `i <= j` (upper triangular)
//! - dark counts:   `D[i][k] = Poisson(i - k; d)` for `i >= k` (lower triangular)
//! - full detector: `f = D · L · p`
//!
//! Inversion never forms an explicit inverse; it runs forward substitution
//! through `D` and back substitution through `L`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{binomial_pmf, poisson_pmf};
use crate::MAX_TRUNCATION;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TransferKind {
    Binomial { efficiency: f64 },
    Dark { mean: f64 },
    Composed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossMatrix {
    dim: usize,
    /// Row-major `dim × dim`.
    entries: Vec<f64>,
    kind: TransferKind,
}

fn check_truncation(truncation: usize) -> Result<()> {
    if truncation > MAX_TRUNCATION {
        return Err(Error::TruncationTooLarge {
            truncation,
            cap: MAX_TRUNCATION,
        });
    }
    Ok(())
}

impl LossMatrix {
    /// Binomial loss matrix. Rejects `η = 0`, where it is singular.
    pub fn binomial(efficiency: f64, truncation: usize) -> Result<Self> {
        if !(efficiency > 0.0 && efficiency <= 1.0) {
            return Err(if efficiency == 0.0 {
                Error::Singular
            } else {
                Error::InvalidParameter {
                    name: "efficiency",
                    value: efficiency,
                    reason: "must lie in (0, 1]",
                }
            });
        }
        check_truncation(truncation)?;
        let dim = truncation + 1;
        let mut entries = vec![0.0; dim * dim];
        for j in 0..dim {
            for i in 0..=j {
                entries[i * dim + j] = binomial_pmf(i, j, efficiency);
            }
        }
        Ok(Self {
            dim,
            entries,
            kind: TransferKind::Binomial { efficiency },
        })
    }

    /// Additive Poisson dark counts. Columns lose the Poisson tail beyond `N`.
    pub fn dark(mean: f64, truncation: usize) -> Result<Self> {
        if !(mean >= 0.0) || !mean.is_finite() {
            return Err(Error::InvalidParameter {
                name: "dark_mean",
                value: mean,
                reason: "must be finite and >= 0",
            });
        }
        check_truncation(truncation)?;
        let dim = truncation + 1;
        let mut entries = vec![0.0; dim * dim];
        for k in 0..dim {
            for i in k..dim {
                entries[i * dim + k] = poisson_pmf(i - k, mean);
            }
        }
        Ok(Self {
            dim,
            entries,
            kind: TransferKind::Dark { mean },
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn truncation(&self) -> usize {
        self.dim - 1
    }

    pub fn kind(&self) -> TransferKind {
        self.kind
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.dim + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.entries[row * self.dim..(row + 1) * self.dim]
    }

    pub fn column_sum(&self, col: usize) -> f64 {
        (0..self.dim).map(|i| self.get(i, col)).sum()
    }

    /// `self · other`.
    pub fn compose(&self, other: &LossMatrix) -> LossMatrix {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        let dim = self.dim;
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            for k in 0..dim {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..dim {
                    entries[i * dim + j] += a * other.get(k, j);
                }
            }
        }
        LossMatrix {
            dim,
            entries,
            kind: TransferKind::Composed,
        }
    }

    /// `self · v`, with `v` padded or cut to the matrix dimension.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .map(|(a, x)| a * x)
                    .sum::<f64>()
            })
            .collect()
    }

    /// Solves `self · x = rhs` by substitution. Only the triangular kinds can
    /// be solved directly.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim;
        let mut x: Vec<f64> = rhs.iter().copied().chain(std::iter::repeat(0.0)).take(n).collect();
        match self.kind {
            TransferKind::Binomial { .. } => {
                for i in (0..n).rev() {
                    let diag = self.get(i, i);
                    if diag == 0.0 {
                        return Err(Error::Singular);
                    }
                    let s: f64 = ((i + 1)..n).map(|j| self.get(i, j) * x[j]).sum();
                    x[i] = (x[i] - s) / diag;
                }
            }
            TransferKind::Dark { .. } => {
                for i in 0..n {
                    let s: f64 = (0..i).map(|k| self.get(i, k) * x[k]).sum();
                    x[i] = (x[i] - s) / self.get(i, i);
                }
            }
            TransferKind::Composed => {
                panic!("composed transfer matrices are solved through their triangular factors")
            }
        }
        Ok(x)
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.dim)
            .map(|i| self.row(i).iter().map(|a| a.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Detector transfer `D(d) · L(η)` kept in factored form.
#[derive(Debug, Clone)]
pub struct DetectorTransfer {
    pub loss: LossMatrix,
    pub dark: LossMatrix,
}

impl DetectorTransfer {
    pub fn new(efficiency: f64, dark_mean: f64, truncation: usize) -> Result<Self> {
        Ok(Self {
            loss: LossMatrix::binomial(efficiency, truncation)?,
            dark: LossMatrix::dark(dark_mean, truncation)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.loss.dim()
    }

    /// `f = D · L · p`.
    pub fn forward(&self, p: &[f64]) -> Vec<f64> {
        self.dark.apply(&self.loss.apply(p))
    }

    /// `p = L⁻¹ · D⁻¹ · f`.
    pub fn invert(&self, f: &[f64]) -> Result<Vec<f64>> {
        let y = self.dark.solve(f)?;
        self.loss.solve(&y)
    }

    pub fn matrix(&self) -> LossMatrix {
        self.dark.compose(&self.loss)
    }

    /// Columns of `(D · L)⁻¹`, as a row-major matrix.
    pub fn inverse(&self) -> Result<Vec<Vec<f64>>> {
        let n = self.dim();
        let mut inv = vec![vec![0.0; n]; n];
        for col in 0..n {
            let mut e = vec![0.0; n];
            e[col] = 1.0;
            let x = self.invert(&e)?;
            for (row, v) in x.into_iter().enumerate() {
                inv[row][col] = v;
            }
        }
        Ok(inv)
    }

    /// ∞-norm condition number `‖DL‖∞ ‖(DL)⁻¹‖∞`.
    pub fn condition_inf(&self) -> Result<f64> {
        let inv = self.inverse()?;
        let inv_norm = inv
            .iter()
            .map(|r| r.iter().map(|a| a.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        Ok(self.matrix().norm_inf() * inv_norm)
    }
}

pub fn loss_matrix(efficiency: f64, truncation: usize) -> Result<LossMatrix> {
    LossMatrix::binomial(efficiency, truncation)
}

pub fn dark_matrix(dark_mean: f64, truncation: usize) -> Result<LossMatrix> {
    LossMatrix::dark(dark_mean, truncation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn unit_efficiency_is_identity() {
        let l = loss_matrix(1.0, 5).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                assert_eq!(l.get(i, j), if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn half_efficiency_three_by_three() {
        let l = loss_matrix(0.5, 2).unwrap();
        let expected = [[1.0, 0.5, 0.25], [0.0, 0.5, 0.5], [0.0, 0.0, 0.25]];
        for (i, row) in expected.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert_abs_diff_eq!(l.get(i, j), v, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn loss_columns_are_stochastic() {
        for eta in [0.05, 0.3, 0.58, 0.68, 0.99] {
            let l = loss_matrix(eta, 40).unwrap();
            for j in 0..=40 {
                assert_abs_diff_eq!(l.column_sum(j), 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn zero_efficiency_is_singular() {
        assert!(matches!(loss_matrix(0.0, 3), Err(Error::Singular)));
        assert!(loss_matrix(1.2, 3).is_err());
        assert!(matches!(
            loss_matrix(0.5, 41),
            Err(Error::TruncationTooLarge { .. })
        ));
    }

    #[test]
    fn dark_matrix_entries() {
        let d0 = dark_matrix(0.0, 4).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(d0.get(i, j), if i == j { 1.0 } else { 0.0 });
            }
        }
        let d = dark_matrix(0.01, 3).unwrap();
        assert_abs_diff_eq!(d.get(1, 0), 0.01 * (-0.01f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(d.get(1, 0), 0.00990, epsilon = 1e-5);
        assert_eq!(d.get(0, 1), 0.0);
    }

    #[test]
    fn dark_column_deficit_is_the_poisson_tail() {
        let mean = 0.3;
        let n = 6;
        let d = dark_matrix(mean, n).unwrap();
        for k in 0..=n {
            let kept: f64 = (0..=(n - k)).map(|j| poisson_pmf(j, mean)).sum();
            assert!(d.column_sum(k) <= 1.0);
            assert_abs_diff_eq!(1.0 - d.column_sum(k), 1.0 - kept, epsilon = 1e-15);
        }
    }

    #[test]
    fn solve_inverts_apply() {
        let t = DetectorTransfer::new(0.58, 0.01, 10).unwrap();
        let p: Vec<f64> = (0..11).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let back = t.invert(&t.forward(&p)).unwrap();
        for (a, b) in p.iter().zip(&back) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }
}
