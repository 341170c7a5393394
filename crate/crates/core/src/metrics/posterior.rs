//! Analytic distribution of the heralded idler.
//!
//! A trigger reporting `m` counts projects the idler onto
//! `P(n | m) ∝ p_n Σ_k Binom(k; n, η) Poisson(m − k; d)`.

use serde::{Deserialize, Serialize};

use crate::detector::DetectorConfig;
use crate::distribution::PhotonNumberDistribution;
use crate::error::{Error, Result};
use crate::source::{SourceKind, SourceModel};
use crate::special::{binomial_pmf, poisson_pmf};
use crate::MAX_TRUNCATION;

/// `P(trigger reports m | n pairs)`, counting resolved exactly.
fn likelihood(n: usize, m: usize, trigger: &DetectorConfig) -> f64 {
    (0..=n.min(m))
        .map(|k| binomial_pmf(k, n, trigger.efficiency) * poisson_pmf(m - k, trigger.dark_mean))
        .sum()
}

/// Pair-number distribution conditioned on the trigger reporting `m`
/// counts, over `0..=truncation`. Dead-spot saturation is not modeled here.
pub fn posterior_oracle(
    model: &SourceModel,
    trigger: &DetectorConfig,
    m: usize,
    truncation: usize,
) -> Result<PhotonNumberDistribution> {
    model.validate()?;
    trigger.validate()?;
    if truncation > MAX_TRUNCATION {
        return Err(Error::TruncationTooLarge {
            truncation,
            cap: MAX_TRUNCATION,
        });
    }
    let weights: Vec<f64> = (0..=truncation)
        .map(|n| model.pmf(n) * likelihood(n, m, trigger))
        .collect();
    if !(weights.iter().sum::<f64>() > 0.0) {
        return Err(Error::ZeroTotal);
    }
    PhotonNumberDistribution::from_weights(&weights)
}

/// Probability that the trigger reports exactly `m` counts on a pulse.
pub fn detected_count_probability(model: &SourceModel, trigger: &DetectorConfig, m: usize) -> f64 {
    let mut total = 0.0;
    for n in 0.. {
        let p = model.pmf(n);
        total += p * likelihood(n, m, trigger);
        if n > m && n as f64 > model.mean_pairs && (p < 1e-18 || n > 4000) {
            break;
        }
    }
    total
}

/// How pump power maps to mean pairs per pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum Calibration {
    /// Fixed mean pairs per µW.
    Slope { slope: f64 },
    /// Slope chosen so that `anchor_power_uw` gives single-photon heralds at
    /// `target_rate_hz` (ideal-resolution trigger).
    Anchored {
        anchor_power_uw: f64,
        target_rate_hz: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub slope: f64,
    pub calibration: Calibration,
    /// Mean pairs at the anchor, when anchored.
    pub anchor_mean_pairs: Option<f64>,
    pub target_probability: Option<f64>,
}

impl Calibration {
    pub fn resolve(
        &self,
        kind: SourceKind,
        trigger: &DetectorConfig,
        rep_rate_hz: f64,
    ) -> Result<CalibrationRecord> {
        match *self {
            Calibration::Slope { slope } => {
                if !(slope >= 0.0) || !slope.is_finite() {
                    return Err(Error::InvalidParameter {
                        name: "slope",
                        value: slope,
                        reason: "must be finite and >= 0",
                    });
                }
                Ok(CalibrationRecord {
                    slope,
                    calibration: *self,
                    anchor_mean_pairs: None,
                    target_probability: None,
                })
            }
            Calibration::Anchored {
                anchor_power_uw,
                target_rate_hz,
            } => {
                let target = target_rate_hz / rep_rate_hz;
                let slope = calibrate_slope(kind, trigger, anchor_power_uw, target)?;
                Ok(CalibrationRecord {
                    slope,
                    calibration: *self,
                    anchor_mean_pairs: Some(slope * anchor_power_uw),
                    target_probability: Some(target),
                })
            }
        }
    }
}

/// Slope (pairs per µW) putting `P(trigger reports 1) = target` at
/// `anchor_power_uw`, on the low-power branch where that probability still
/// rises with pump power.
pub fn calibrate_slope(
    kind: SourceKind,
    trigger: &DetectorConfig,
    anchor_power_uw: f64,
    target: f64,
) -> Result<f64> {
    trigger.validate()?;
    if !(anchor_power_uw > 0.0) || !anchor_power_uw.is_finite() {
        return Err(Error::InvalidParameter {
            name: "anchor_power_uw",
            value: anchor_power_uw,
            reason: "must be finite and > 0",
        });
    }
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidParameter {
            name: "target_probability",
            value: target,
            reason: "must lie in (0, 1)",
        });
    }
    let prob = |mu: f64| detected_count_probability(&SourceModel { kind, mean_pairs: mu }, trigger, 1);

    // Walk a log grid up to the first crossing, then bisect.
    let grid: Vec<f64> = (0..=400).map(|i| 1e-6 * 10f64.powf(i as f64 * 7.0 / 400.0)).collect();
    let mut lo = 0.0;
    let mut hi = None;
    let mut prev = prob(0.0);
    for &mu in &grid {
        let p = prob(mu);
        if p >= target {
            hi = Some(mu);
            break;
        }
        if p < prev {
            break;
        }
        lo = mu;
        prev = p;
    }
    let Some(mut hi) = hi else {
        return Err(Error::InvalidParameter {
            name: "target_probability",
            value: target,
            reason: "exceeds the largest single-count probability of this trigger",
        });
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if prob(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi) / anchor_power_uw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{binomial_pmf, poisson_pmf};

    fn trigger(eta: f64, dark: f64) -> DetectorConfig {
        DetectorConfig::vlpc(eta).with_dark(dark)
    }

    #[test]
    fn perfect_trigger_gives_point_mass() {
        for mu in [0.01, 0.5, 3.0] {
            let model = SourceModel::poisson(mu).unwrap();
            for m in 0..5 {
                let p = posterior_oracle(&model, &trigger(1.0, 0.0), m, 20).unwrap();
                assert_eq!(p, PhotonNumberDistribution::point_mass(m, 20));
            }
        }
    }

    #[test]
    fn weak_pump_heralds_single_photons() {
        let model = SourceModel::poisson(1e-4).unwrap();
        let p = posterior_oracle(&model, &trigger(0.68, 0.0), 1, 10).unwrap();
        assert!(p.get(1) > 0.9999, "{}", p.get(1));
    }

    /// Joint enumeration over (pairs n, surviving photons k, darks j).
    fn brute_force(mu: f64, eta: f64, dark: f64, m: usize, nmax: usize) -> Vec<f64> {
        let mut joint = vec![0.0; nmax + 1];
        for n in 0..=nmax {
            let pn = (-mu).exp() * mu.powi(n as i32)
                / (1..=n).map(|x| x as f64).product::<f64>();
            for k in 0..=n {
                for j in 0..=m {
                    if k + j == m {
                        joint[n] += pn * binomial_pmf(k, n, eta) * poisson_pmf(j, dark);
                    }
                }
            }
        }
        let z: f64 = joint.iter().sum();
        joint.iter().map(|x| x / z).collect()
    }

    #[test]
    fn matches_brute_force() {
        for (m, dark) in [(1, 0.0), (2, 0.0), (1, 0.05), (3, 0.2)] {
            let model = SourceModel::poisson(0.5).unwrap();
            let p = posterior_oracle(&model, &trigger(0.68, dark), m, 20).unwrap();
            let q = brute_force(0.5, 0.68, dark, m, 20);
            for (a, b) in p.probs().iter().zip(&q) {
                assert!((a - b).abs() < 1e-12, "m {m}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn impossible_condition_is_an_error() {
        let model = SourceModel::poisson(0.0).unwrap();
        assert!(matches!(
            posterior_oracle(&model, &trigger(0.68, 0.0), 1, 10),
            Err(Error::ZeroTotal)
        ));
    }

    #[test]
    fn fidelity_decreases_with_pump() {
        let t = trigger(0.68, 0.0);
        for kind in [SourceKind::Poisson, SourceKind::Thermal] {
            for m in 1..=4 {
                let mut last = f64::INFINITY;
                for i in 0..=30 {
                    let mu = 1e-3 * 1000f64.powf(i as f64 / 30.0);
                    let model = SourceModel::new(kind, mu).unwrap();
                    let f = posterior_oracle(&model, &t, m, 40).unwrap().get(m);
                    assert!(f <= last + 1e-12, "{kind:?} m {m} mu {mu}: {f} > {last}");
                    last = f;
                }
            }
        }
    }

    #[test]
    fn anchored_calibration_hits_target() {
        let t = trigger(0.68, 0.0);
        let target = 11_800.0 / 45_000.0;
        let slope = calibrate_slope(SourceKind::Poisson, &t, 100.0, target).unwrap();
        let model = SourceModel::poisson(slope * 100.0).unwrap();
        let p = detected_count_probability(&model, &t, 1);
        assert!((p - target).abs() < 1e-12);
        // Lower branch of x e^-x with x = 0.68 µ.
        let x = 0.68 * slope * 100.0;
        assert!(x < 1.0);
        assert!((x * (-x).exp() - target).abs() < 1e-12);
    }

    #[test]
    fn unreachable_target_is_reported() {
        let t = trigger(0.68, 0.0);
        assert!(calibrate_slope(SourceKind::Poisson, &t, 100.0, 0.5).is_err());
    }
}
