//! Absolute efficiency from pair coincidences.
//!
//! Because photons come in pairs, the fraction of arm-2 firings that coincide
//! with an arm-1 firing estimates the efficiency of arm 1, and vice versa.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::ExperimentRun;

/// A detector "fires" on a pulse when it reports at least one count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoincidenceCounts {
    pub singles_1: u64,
    pub singles_2: u64,
    pub coincidences: u64,
    pub pulses: u64,
}

impl CoincidenceCounts {
    pub fn new(singles_1: u64, singles_2: u64, coincidences: u64, pulses: u64) -> Result<Self> {
        if coincidences > singles_1.min(singles_2) || singles_1.max(singles_2) > pulses {
            return Err(Error::InvalidParameter {
                name: "coincidences",
                value: coincidences as f64,
                reason: "need coincidences <= singles <= pulses",
            });
        }
        Ok(Self {
            singles_1,
            singles_2,
            coincidences,
            pulses,
        })
    }

    /// Trigger is arm 1, monitor is arm 2.
    pub fn from_run(run: &ExperimentRun) -> Self {
        let fired_1: u64 = (1..run.detected.num_rows() as u32)
            .map(|r| run.detected.row_total(r))
            .sum();
        let fired_2: u64 = run.detected.column_totals().iter().skip(1).sum();
        let both: u64 = (1..run.detected.num_rows() as u32)
            .map(|r| run.detected.row(r).iter().skip(1).sum::<u64>())
            .sum();
        Self {
            singles_1: fired_1,
            singles_2: fired_2,
            coincidences: both,
            pulses: run.pulses,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyEstimate {
    pub trigger: f64,
    pub monitor: f64,
}

/// `η1 = C / S2`, `η2 = C / S1`.
pub fn klyshko_efficiency(c: &CoincidenceCounts) -> Result<EfficiencyEstimate> {
    if c.singles_1 == 0 {
        return Err(Error::ZeroSingles { arm: "arm 1" });
    }
    if c.singles_2 == 0 {
        return Err(Error::ZeroSingles { arm: "arm 2" });
    }
    Ok(EfficiencyEstimate {
        trigger: c.coincidences as f64 / c.singles_2 as f64,
        monitor: c.coincidences as f64 / c.singles_1 as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlyshkoReport {
    pub counts: CoincidenceCounts,
    pub raw: EfficiencyEstimate,
    /// Estimate after removing dark-count singles and accidental coincidences.
    pub dark_corrected: Option<EfficiencyEstimate>,
    /// Coincidences expected from dark counts (dark-dark and dark-photon).
    pub expected_accidentals: f64,
}

/// Raw estimate plus a variant corrected for independent Poisson darks with
/// means `d1`, `d2` per pulse.
///
/// With dark-fire probabilities `q = 1 − e^(−d)` independent of photons,
/// photon-only firing fractions follow from `1 − S = (1 − q)(1 − a)` and the
/// joint no-fire fraction, which gives the photon-only coincidences `c₀`.
pub fn klyshko_dark_corrected(
    c: &CoincidenceCounts,
    dark_1: f64,
    dark_2: f64,
) -> Result<KlyshkoReport> {
    let raw = klyshko_efficiency(c)?;
    let n = c.pulses as f64;
    let (s1, s2, cc) = (
        c.singles_1 as f64 / n,
        c.singles_2 as f64 / n,
        c.coincidences as f64 / n,
    );
    let (q1, q2) = (1.0 - (-dark_1).exp(), 1.0 - (-dark_2).exp());
    let a1 = 1.0 - (1.0 - s1) / (1.0 - q1);
    let a2 = 1.0 - (1.0 - s2) / (1.0 - q2);
    let c0 = (1.0 - s1 - s2 + cc) / ((1.0 - q1) * (1.0 - q2)) - 1.0 + a1 + a2;
    let dark_corrected = (a1 > 0.0 && a2 > 0.0).then(|| EfficiencyEstimate {
        trigger: c0 / a2,
        monitor: c0 / a1,
    });
    Ok(KlyshkoReport {
        counts: *c,
        raw,
        dark_corrected,
        expected_accidentals: (cc - c0) * n,
    })
}
