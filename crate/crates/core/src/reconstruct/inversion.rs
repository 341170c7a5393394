use crate::distribution::PhotonNumberDistribution;
use crate::error::{Error, Result};
use crate::transfer::DetectorTransfer;
use crate::MAX_TRUNCATION;

fn transfer(efficiency: f64, dark_mean: f64, truncation: usize) -> Result<DetectorTransfer> {
    if truncation > MAX_TRUNCATION {
        return Err(Error::TruncationTooLarge {
            truncation,
            cap: MAX_TRUNCATION,
        });
    }
    DetectorTransfer::new(efficiency, dark_mean, truncation)
}

/// `p = L(η)⁻¹ · D(d)⁻¹ · f` by forward then back substitution. `f` is padded
/// with zeros or cut to `truncation + 1` entries. The result is signed.
pub fn invert_counts(
    f: &[f64],
    efficiency: f64,
    dark_mean: f64,
    truncation: usize,
) -> Result<PhotonNumberDistribution> {
    let t = transfer(efficiency, dark_mean, truncation)?;
    PhotonNumberDistribution::signed(t.invert(f)?)
}

/// ∞-norm condition number of `D(d) · L(η)`. Grows roughly like a power of
/// `(1 + 2(1-η)/η)` in `N`, which is why inversion amplifies counting noise.
pub fn condition_report(efficiency: f64, dark_mean: f64, truncation: usize) -> Result<f64> {
    transfer(efficiency, dark_mean, truncation)?.condition_inf()
}

/// Standard errors of the direct inversion when `f` is estimated from
/// `events` multinomial draws with expected frequencies `f_expected`.
///
/// `Cov(p̂) = A (diag f − f fᵀ) Aᵀ / events` with `A = (D L)⁻¹`.
pub fn standard_errors(
    f_expected: &[f64],
    events: u64,
    efficiency: f64,
    dark_mean: f64,
    truncation: usize,
) -> Result<Vec<f64>> {
    let t = transfer(efficiency, dark_mean, truncation)?;
    let a = t.inverse()?;
    let n = t.dim();
    let f: Vec<f64> = (0..n).map(|i| f_expected.get(i).copied().unwrap_or(0.0)).collect();
    if events == 0 {
        return Ok(vec![f64::INFINITY; n]);
    }
    Ok(a.iter()
        .map(|row| {
            let af: f64 = row.iter().zip(&f).map(|(x, fi)| x * fi).sum();
            let a2f: f64 = row.iter().zip(&f).map(|(x, fi)| x * x * fi).sum();
            ((a2f - af * af).max(0.0) / events as f64).sqrt()
        })
        .collect())
}
