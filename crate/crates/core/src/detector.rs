//! Forward model of a photon-number-resolving detector (VLPC-like).
//!
//! Each pulse goes through binomial loss, additive Poisson dark counts, an
//! optional dead-spot saturation stage and finally multiplication gain. The
//! gain of each detected photon is an independent Gaussian with mean `G` and
//! variance `(F - 1) G²`, so `⟨M²⟩/⟨M⟩² = F` for a single photon and a
//! `k`-photon pulse has variance `σ0² + k (F - 1) G²`.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use crate::transfer::{dark_matrix, loss_matrix};

/// Excess noise factor of a VLPC.
pub const VLPC_EXCESS_NOISE: f64 = 1.03;
pub const DEFAULT_DARK_MEAN: f64 = 0.01;
pub const DEFAULT_GAIN: f64 = 1.0;
/// Baseline electronic noise in units of the gain.
pub const DEFAULT_BASELINE_SIGMA: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PulseHeight(pub f64);

impl PulseHeight {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Geometry of the dead-spot saturation model, lengths in µm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeadSpot {
    #[serde(default = "DeadSpot::default_active_diameter")]
    pub active_diameter: f64,
    #[serde(default = "DeadSpot::default_spot_diameter")]
    pub spot_diameter: f64,
    /// Standard deviation of the Gaussian beam profile on the detector.
    pub beam_sigma: f64,
}

impl DeadSpot {
    fn default_active_diameter() -> f64 {
        1000.0
    }

    fn default_spot_diameter() -> f64 {
        5.0
    }

    pub fn new(beam_sigma: f64) -> Result<Self> {
        let spot = Self {
            active_diameter: Self::default_active_diameter(),
            spot_diameter: Self::default_spot_diameter(),
            beam_sigma,
        };
        spot.validate()?;
        Ok(spot)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("beam_sigma", self.beam_sigma),
            ("active_diameter", self.active_diameter),
            ("spot_diameter", self.spot_diameter),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be finite and > 0",
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    /// Detection efficiency η, including collection losses.
    pub efficiency: f64,
    /// Mean dark counts per pulse window.
    #[serde(default = "default_dark")]
    pub dark_mean: f64,
    /// Mean pulse height per detected photon.
    #[serde(default = "default_gain")]
    pub gain: f64,
    /// Excess noise factor `F = ⟨M²⟩/⟨M⟩²`.
    #[serde(default = "default_excess_noise")]
    pub excess_noise: f64,
    /// Electronic baseline noise, same units as `gain`.
    #[serde(default = "default_baseline_sigma")]
    pub baseline_sigma: f64,
    #[serde(default)]
    pub deadspot: Option<DeadSpot>,
}

fn default_dark() -> f64 {
    DEFAULT_DARK_MEAN
}
fn default_gain() -> f64 {
    DEFAULT_GAIN
}
fn default_excess_noise() -> f64 {
    VLPC_EXCESS_NOISE
}
fn default_baseline_sigma() -> f64 {
    DEFAULT_BASELINE_SIGMA * DEFAULT_GAIN
}

impl DetectorConfig {
    /// VLPC-like detector with the given efficiency and default noise.
    pub fn vlpc(efficiency: f64) -> Self {
        Self {
            efficiency,
            dark_mean: DEFAULT_DARK_MEAN,
            gain: DEFAULT_GAIN,
            excess_noise: VLPC_EXCESS_NOISE,
            baseline_sigma: DEFAULT_BASELINE_SIGMA * DEFAULT_GAIN,
            deadspot: None,
        }
    }

    /// Noise-free, lossless, dark-free detector.
    pub fn ideal() -> Self {
        Self {
            efficiency: 1.0,
            dark_mean: 0.0,
            gain: 1.0,
            excess_noise: 1.0,
            baseline_sigma: 0.0,
            deadspot: None,
        }
    }

    pub fn with_dark(mut self, dark_mean: f64) -> Self {
        self.dark_mean = dark_mean;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let checks: [(&'static str, f64, bool, &'static str); 5] = [
            (
                "efficiency",
                self.efficiency,
                (0.0..=1.0).contains(&self.efficiency),
                "must lie in [0, 1]",
            ),
            ("dark_mean", self.dark_mean, self.dark_mean >= 0.0, "must be >= 0"),
            ("gain", self.gain, self.gain > 0.0, "must be > 0"),
            (
                "excess_noise",
                self.excess_noise,
                self.excess_noise >= 1.0,
                "must be >= 1",
            ),
            (
                "baseline_sigma",
                self.baseline_sigma,
                self.baseline_sigma >= 0.0,
                "must be >= 0",
            ),
        ];
        for (name, value, ok, reason) in checks {
            if !ok || !value.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason,
                });
            }
        }
        if let Some(spot) = &self.deadspot {
            spot.validate()?;
        }
        Ok(())
    }

    /// Pulse-height standard deviation for `k` detected photons.
    pub fn height_sigma(&self, k: u32) -> f64 {
        (self.baseline_sigma.powi(2)
            + k as f64 * (self.excess_noise - 1.0) * self.gain.powi(2))
        .sqrt()
    }

    /// Sampler with the per-pulse distributions prepared once.
    pub fn chain(&self) -> Result<DetectorChain> {
        self.validate()?;
        Ok(DetectorChain {
            cfg: *self,
            dark: (self.dark_mean > 0.0)
                .then(|| Poisson::new(self.dark_mean).expect("dark mean > 0")),
        })
    }
}

/// Binomial loss: each of `n_true` photons survives with probability `η`.
pub fn apply_loss<R: Rng + ?Sized>(n_true: u32, efficiency: f64, rng: &mut R) -> u32 {
    if n_true == 0 || efficiency <= 0.0 {
        0
    } else if efficiency >= 1.0 {
        n_true
    } else {
        Binomial::new(n_true as u64, efficiency)
            .expect("efficiency in (0, 1)")
            .sample(rng) as u32
    }
}

/// Adds a Poisson(`dark_mean`) number of dark counts.
pub fn add_dark<R: Rng + ?Sized>(k: u32, dark_mean: f64, rng: &mut R) -> u32 {
    if dark_mean <= 0.0 {
        k
    } else {
        k + Poisson::new(dark_mean).expect("dark mean > 0").sample(rng) as u32
    }
}

/// Places `k` photons on the active area one after the other; a photon that
/// lands within `spot_diameter` of an earlier surviving hit is lost.
pub fn deadspot_thinning<R: Rng + ?Sized>(k: u32, spot: &DeadSpot, rng: &mut R) -> Result<u32> {
    spot.validate()?;
    if k < 2 {
        return Ok(k);
    }
    let radius2 = (spot.active_diameter / 2.0).powi(2);
    let dead2 = spot.spot_diameter.powi(2);
    let mut hits: Vec<(f64, f64)> = Vec::with_capacity(k as usize);
    for _ in 0..k {
        // Beam profile restricted to the active area.
        let (x, y) = loop {
            let x = spot.beam_sigma * rng.sample::<f64, _>(StandardNormal);
            let y = spot.beam_sigma * rng.sample::<f64, _>(StandardNormal);
            if x * x + y * y <= radius2 {
                break (x, y);
            }
        };
        if hits
            .iter()
            .all(|&(hx, hy)| (x - hx).powi(2) + (y - hy).powi(2) >= dead2)
        {
            hits.push((x, y));
        }
    }
    Ok(hits.len() as u32)
}

/// Gaussian pulse height with mean `k G` and variance `σ0² + k (F-1) G²`.
pub fn pulse_height<R: Rng + ?Sized>(k: u32, cfg: &DetectorConfig, rng: &mut R) -> PulseHeight {
    let mean = k as f64 * cfg.gain;
    let sigma = cfg.height_sigma(k);
    if sigma == 0.0 {
        PulseHeight(mean)
    } else {
        PulseHeight(mean + sigma * rng.sample::<f64, _>(StandardNormal))
    }
}

/// A detector with its sampling distributions prepared.
#[derive(Debug, Clone)]
pub struct DetectorChain {
    cfg: DetectorConfig,
    dark: Option<Poisson<f64>>,
}

impl DetectorChain {
    pub fn config(&self) -> &DetectorConfig {
        &self.cfg
    }

    /// Detected count and pulse height for `n_true` incident photons.
    pub fn detect<R: Rng + ?Sized>(&self, n_true: u32, rng: &mut R) -> (u32, PulseHeight) {
        let mut k = apply_loss(n_true, self.cfg.efficiency, rng);
        if let Some(dark) = &self.dark {
            k += dark.sample(rng) as u32;
        }
        if let Some(spot) = &self.cfg.deadspot {
            k = deadspot_thinning(k, spot, rng).expect("geometry validated by chain()");
        }
        (k, pulse_height(k, &self.cfg, rng))
    }
}
