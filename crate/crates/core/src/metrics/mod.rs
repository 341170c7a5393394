//! Figures of merit for heralded number states.

mod klyshko;
mod posterior;
mod sweep;

pub use klyshko::{
    klyshko_dark_corrected, klyshko_efficiency, CoincidenceCounts, EfficiencyEstimate,
    KlyshkoReport,
};
pub use posterior::{
    calibrate_slope, detected_count_probability, posterior_oracle, Calibration,
    CalibrationRecord,
};
pub use sweep::{
    conditional_reconstruction, reconstruction_truncation, sweep, ConditionalReconstruction,
    LabelResult, Readout, SweepConfig, SweepPoint, SweepResult,
};

use serde::{Deserialize, Serialize};

use crate::distribution::PhotonNumberDistribution;
use crate::error::{Error, Result};

/// Target rate / repetition rate at the low-power reference point:
/// 11800 Hz of single-photon heralds at 45 kHz.
pub const REFERENCE_RATE_HZ: f64 = 11_800.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fidelity {
    /// Raw entry of the (possibly signed) reconstruction.
    pub signed: f64,
    /// `signed` clamped to `[0, 1]` for reporting.
    pub clamped: f64,
}

/// Overlap with the `n`-photon number state: the probability of `n` photons.
pub fn heralded_fidelity(reconstructed: &PhotonNumberDistribution, n: usize) -> Fidelity {
    let signed = reconstructed.get(n);
    Fidelity {
        signed,
        clamped: signed.clamp(0.0, 1.0),
    }
}

/// Heralding rate: `rep_rate · label_count / pulses`.
pub fn generation_rate(label_count: u64, pulses: u64, rep_rate_hz: f64) -> Result<f64> {
    if pulses == 0 {
        return Err(Error::InvalidParameter {
            name: "pulses",
            value: 0.0,
            reason: "rate needs at least one pulse",
        });
    }
    Ok(rep_rate_hz * label_count as f64 / pulses as f64)
}
