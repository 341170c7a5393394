//! Recovery of photon-number distributions from detector data.
//!
//! The pipeline mirrors what is done with a real pulse-area histogram: fit
//! one Gaussian per photon-number peak, normalize the peak areas into a
//! detected distribution `f`, then undo dark counts and binomial loss.

mod constrained;
mod inversion;
mod peaks;

use serde::{Deserialize, Serialize};

pub use constrained::{invert_counts_constrained, simplex_least_squares, MAX_ITERATIONS};
pub use inversion::{condition_report, invert_counts, standard_errors};
pub use peaks::{detected_distribution, fit_peaks, fit_peaks_with, FitOptions, Peak, PeakFit};

use crate::distribution::PhotonNumberDistribution;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReconstructionMode {
    /// Direct triangular inversion; entries may go negative.
    #[default]
    Signed,
    /// Least squares over the probability simplex.
    Constrained,
}

impl std::str::FromStr for ReconstructionMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "signed" => Ok(Self::Signed),
            "constrained" => Ok(Self::Constrained),
            other => Err(format!("unknown mode `{other}` (expected signed or constrained)")),
        }
    }
}

/// Inverts detected distribution `f` with the chosen estimator.
pub fn reconstruct(
    f: &[f64],
    efficiency: f64,
    dark_mean: f64,
    truncation: usize,
    mode: ReconstructionMode,
) -> Result<PhotonNumberDistribution> {
    match mode {
        ReconstructionMode::Signed => invert_counts(f, efficiency, dark_mean, truncation),
        ReconstructionMode::Constrained => {
            invert_counts_constrained(f, efficiency, dark_mean, truncation)
        }
    }
}
