use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `Σ p_n = 1` for normalized distributions.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// Probabilities over photon numbers `0..=N`.
///
/// Normalized instances have non-negative entries summing to one. Signed
/// instances come out of direct loss inversion and may carry small negative
/// entries; they are only required to be finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotonNumberDistribution {
    probs: Vec<f64>,
    signed: bool,
}

impl PhotonNumberDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_entries(&probs)?;
        if let Some(&p) = probs.iter().find(|&&p| p < 0.0) {
            return Err(Error::InvalidParameter {
                name: "probability",
                value: p,
                reason: "normalized distributions are non-negative",
            });
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::NotNormalized { sum });
        }
        Ok(Self {
            probs,
            signed: false,
        })
    }

    /// Rescales non-negative weights to unit sum.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        check_entries(weights)?;
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) || weights.iter().any(|&w| w < 0.0) {
            return Err(Error::ZeroTotal);
        }
        Ok(Self {
            probs: weights.iter().map(|w| w / sum).collect(),
            signed: false,
        })
    }

    pub fn signed(probs: Vec<f64>) -> Result<Self> {
        check_entries(&probs)?;
        Ok(Self {
            probs,
            signed: true,
        })
    }

    /// All mass on `n`, truncated at `truncation`.
    pub fn point_mass(n: usize, truncation: usize) -> Self {
        let mut probs = vec![0.0; truncation.max(n) + 1];
        probs[n] = 1.0;
        Self {
            probs,
            signed: false,
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_probs(self) -> Vec<f64> {
        self.probs
    }

    /// Probability of `n` photons, zero beyond the truncation.
    pub fn get(&self, n: usize) -> f64 {
        self.probs.get(n).copied().unwrap_or(0.0)
    }

    pub fn truncation(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn is_signed(&self) -> bool {
        self.signed
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn has_negative(&self) -> bool {
        self.probs.iter().any(|&p| p < 0.0)
    }

    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum()
    }

    /// Copy padded with zeros or cut to `truncation + 1` entries.
    pub fn resized(&self, truncation: usize) -> Vec<f64> {
        let mut v = self.probs.clone();
        v.resize(truncation + 1, 0.0);
        v
    }
}

fn check_entries(probs: &[f64]) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::InvalidParameter {
            name: "length",
            value: 0.0,
            reason: "distribution needs at least one entry",
        });
    }
    match probs.iter().position(|p| !p.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}
