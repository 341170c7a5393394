//! Heralded generation of photon number states.
//!
//! A pulsed down-conversion source emits signal/idler photon pairs. A
//! photon-number-resolving trigger detector reads the signal arm and a single
//! channel analyzer (SCA) labels each pulse by its pulse height; the idler arm
//! is then conditionally prepared in (approximately) a photon number state. A
//! second detector monitors the idler and its pulse-area histogram is turned
//! back into a photon-number distribution by Gaussian peak fitting,
//! dark-count deconvolution and binomial loss inversion.
//!
//! Modules follow that chain:
//!
//! - [`source`]: pair-number statistics and pump calibration
//! - [`detector`]: loss, dark counts, dead-spot saturation, gain noise
//! - [`experiment`]: pulse-by-pulse Monte Carlo of the full apparatus
//! - [`reconstruct`]: peak fitting and loss/dark inversion
//! - [`metrics`]: efficiency estimation, posterior oracle, fidelity, rate, sweeps
//!
//! [`transfer`] holds the triangular transfer matrices shared by the detector
//! forward model and the inversion, and [`io`] the CSV/JSON formats.

pub mod detector;
pub mod distribution;
pub mod error;
pub mod experiment;
pub mod histogram;
pub mod io;
pub mod metrics;
pub mod reconstruct;
pub mod rng;
pub mod source;
pub mod transfer;

mod special;

pub use detector::{DeadSpot, DetectorConfig, PulseHeight};
pub use distribution::PhotonNumberDistribution;
pub use error::{Error, Result};
pub use experiment::{
    Classification, ExperimentConfig, ExperimentRun, JointCounts, PulseRecord, ScaWindow,
    ScaWindows,
};
pub use histogram::Histogram;
pub use metrics::{CoincidenceCounts, SweepConfig, SweepResult};
pub use reconstruct::{PeakFit, ReconstructionMode};
pub use source::{PumpCalibration, SourceKind, SourceModel};
pub use transfer::{LossMatrix, TransferKind};

/// Upper bound on the photon-number truncation used anywhere in the crate.
pub const MAX_TRUNCATION: usize = 40;

/// Pump repetition rate of the reference apparatus (Hz).
pub const DEFAULT_REP_RATE_HZ: f64 = 45_000.0;
