//! Pair-number statistics of a pulsed down-conversion source.
//!
//! Signal and idler photons are created in pairs, so a single draw of the
//! pair number per pulse feeds both arms.

use rand::Rng;
use rand_distr::{Distribution, Geometric, Poisson};
use serde::{Deserialize, Serialize};

use crate::distribution::PhotonNumberDistribution;
use crate::error::{Error, Result};
use crate::special::ln_factorial;
use crate::MAX_TRUNCATION;

/// Tail mass allowed beyond an automatically chosen truncation.
pub const TAIL_MASS_LIMIT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SourceKind {
    /// Many temporal modes per pump pulse: Poisson pair number.
    #[serde(rename = "poisson-multimode", alias = "poisson")]
    Poisson,
    /// A single mode: geometric (Bose-Einstein) pair number.
    #[serde(rename = "thermal-single-mode", alias = "thermal")]
    Thermal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceModel {
    pub kind: SourceKind,
    /// Mean pairs per pump pulse.
    pub mean_pairs: f64,
}

/// Linear map from pump power (µW) to mean pairs per pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpCalibration {
    /// Mean pairs per µW.
    pub slope: f64,
    /// Pump power in µW.
    pub power: f64,
}

impl PumpCalibration {
    pub fn mean_pairs(&self) -> Result<f64> {
        let mu = self.slope * self.power;
        if !(mu >= 0.0) || !mu.is_finite() {
            return Err(Error::InvalidParameter {
                name: "slope * power",
                value: mu,
                reason: "mean pair number must be finite and >= 0",
            });
        }
        Ok(mu)
    }
}

impl SourceModel {
    pub fn new(kind: SourceKind, mean_pairs: f64) -> Result<Self> {
        let model = Self { kind, mean_pairs };
        model.validate()?;
        Ok(model)
    }

    pub fn poisson(mean_pairs: f64) -> Result<Self> {
        Self::new(SourceKind::Poisson, mean_pairs)
    }

    pub fn thermal(mean_pairs: f64) -> Result<Self> {
        Self::new(SourceKind::Thermal, mean_pairs)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean_pairs >= 0.0) || !self.mean_pairs.is_finite() {
            return Err(Error::InvalidParameter {
                name: "mean_pairs",
                value: self.mean_pairs,
                reason: "must be finite and >= 0",
            });
        }
        Ok(())
    }

    pub fn with_mean(&self, mean_pairs: f64) -> Result<Self> {
        Self::new(self.kind, mean_pairs)
    }

    /// Probability of exactly `n` pairs in one pulse.
    pub fn pmf(&self, n: usize) -> f64 {
        let mu = self.mean_pairs;
        if mu == 0.0 {
            return if n == 0 { 1.0 } else { 0.0 };
        }
        match self.kind {
            SourceKind::Poisson => (n as f64 * mu.ln() - mu - ln_factorial(n)).exp(),
            SourceKind::Thermal => {
                (n as f64 * mu.ln() - (n as f64 + 1.0) * (1.0 + mu).ln()).exp()
            }
        }
    }

    /// Probability of more than `truncation` pairs.
    pub fn tail_mass(&self, truncation: usize) -> f64 {
        let mu = self.mean_pairs;
        if mu == 0.0 {
            return 0.0;
        }
        match self.kind {
            SourceKind::Thermal => (mu / (1.0 + mu)).powi(truncation as i32 + 1),
            SourceKind::Poisson => {
                // Summed upward from N+1; terms decay geometrically once n > µ.
                let mut total = 0.0;
                let mut n = truncation + 1;
                loop {
                    let term = self.pmf(n);
                    total += term;
                    if n as f64 > mu && term <= total * 1e-17 {
                        break;
                    }
                    n += 1;
                }
                total
            }
        }
    }

    /// Smallest N with tail mass below [`TAIL_MASS_LIMIT`], capped at
    /// [`MAX_TRUNCATION`].
    pub fn auto_truncation(&self) -> Result<usize> {
        for n in 0..=MAX_TRUNCATION {
            if self.tail_mass(n) < TAIL_MASS_LIMIT {
                return Ok(n);
            }
        }
        Err(Error::TailMass {
            truncation: MAX_TRUNCATION,
            mass: self.tail_mass(MAX_TRUNCATION),
            limit: TAIL_MASS_LIMIT,
        })
    }

    /// Pair-number distribution over `0..=truncation`.
    pub fn distribution(&self, truncation: usize) -> Result<PhotonNumberDistribution> {
        if truncation > MAX_TRUNCATION {
            return Err(Error::TruncationTooLarge {
                truncation,
                cap: MAX_TRUNCATION,
            });
        }
        let mass = self.tail_mass(truncation);
        if mass >= TAIL_MASS_LIMIT {
            return Err(Error::TailMass {
                truncation,
                mass,
                limit: TAIL_MASS_LIMIT,
            });
        }
        PhotonNumberDistribution::new((0..=truncation).map(|n| self.pmf(n)).collect())
    }

    pub fn sampler(&self) -> PairSampler {
        let mu = self.mean_pairs;
        if mu == 0.0 {
            return PairSampler::Vacuum;
        }
        match self.kind {
            SourceKind::Poisson => PairSampler::Poisson(Poisson::new(mu).expect("mu > 0")),
            SourceKind::Thermal => {
                PairSampler::Thermal(Geometric::new(1.0 / (1.0 + mu)).expect("p in (0, 1]"))
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        self.sampler().sample(rng)
    }
}

/// Prepared sampler for repeated pair-number draws.
#[derive(Debug, Clone, Copy)]
pub enum PairSampler {
    Vacuum,
    Poisson(Poisson<f64>),
    /// Number of failures before the first success, `P(k) = (1-p)^k p`.
    Thermal(Geometric),
}

impl PairSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        match self {
            PairSampler::Vacuum => 0,
            PairSampler::Poisson(d) => d.sample(rng) as u32,
            PairSampler::Thermal(d) => d.sample(rng) as u32,
        }
    }
}

pub fn pair_pmf(model: &SourceModel, n: usize) -> f64 {
    model.pmf(n)
}

pub fn pair_distribution(
    model: &SourceModel,
    truncation: usize,
) -> Result<PhotonNumberDistribution> {
    model.distribution(truncation)
}

pub fn sample_pair_count<R: Rng + ?Sized>(model: &SourceModel, rng: &mut R) -> u32 {
    model.sample(rng)
}
