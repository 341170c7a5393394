//! Fidelity/rate tradeoff over pump power.

use serde::{Deserialize, Serialize};

use crate::distribution::PhotonNumberDistribution;
use crate::error::{Error, Result};
use crate::experiment::{run_experiment, Classification, ExperimentConfig, ExperimentRun};
use crate::reconstruct::{
    detected_distribution, fit_peaks_with, reconstruct, standard_errors, FitOptions,
    ReconstructionMode,
};
use crate::source::SourceModel;
use crate::MAX_TRUNCATION;

use super::posterior::{posterior_oracle, Calibration, CalibrationRecord};
use super::{generation_rate, heralded_fidelity, REFERENCE_RATE_HZ};

/// How the idler's detected distribution is read off a conditional run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Readout {
    /// Exact detected counts, i.e. perfectly separated peak areas.
    #[default]
    Counts,
    /// Gaussian fit to the conditional pulse-area histogram.
    PeakFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Experiment template; its source mean is replaced at each point.
    pub template: ExperimentConfig,
    pub powers_uw: Vec<f64>,
    pub pulses_per_point: u64,
    #[serde(default = "default_calibration")]
    pub calibration: Calibration,
    #[serde(default = "default_classification")]
    pub classification: Classification,
    #[serde(default)]
    pub readout: Readout,
    #[serde(default)]
    pub mode: ReconstructionMode,
    #[serde(default = "default_labels")]
    pub labels: Vec<u32>,
}

fn default_calibration() -> Calibration {
    Calibration::Anchored {
        anchor_power_uw: 100.0,
        target_rate_hz: REFERENCE_RATE_HZ,
    }
}

fn default_classification() -> Classification {
    Classification::PulseHeight
}

fn default_labels() -> Vec<u32> {
    vec![1, 2, 3, 4]
}

impl SweepConfig {
    pub fn new(template: ExperimentConfig, powers_uw: Vec<f64>, pulses_per_point: u64) -> Self {
        Self {
            template,
            powers_uw,
            pulses_per_point,
            calibration: default_calibration(),
            classification: default_classification(),
            readout: Readout::default(),
            mode: ReconstructionMode::default(),
            labels: default_labels(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelResult {
    pub n: u32,
    pub heralds: u64,
    pub rate_hz: f64,
    /// Binomial standard error of `rate_hz`.
    pub rate_se_hz: f64,
    pub truncation: usize,
    /// `None` when no pulse carried this label.
    pub reconstructed: Option<PhotonNumberDistribution>,
    pub fidelity_signed: Option<f64>,
    pub fidelity_clamped: Option<f64>,
    /// Ideal-resolution analytic fidelity at the same mean pair number.
    pub fidelity_oracle: f64,
    pub oracle: PhotonNumberDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub power_uw: f64,
    pub mean_pairs: f64,
    pub seed: u64,
    pub pulses: u64,
    pub labels: Vec<LabelResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub calibration: CalibrationRecord,
    pub classification: Classification,
    pub readout: Readout,
    pub mode: ReconstructionMode,
    pub seed: u64,
    pub points: Vec<SweepPoint>,
}

/// Truncation for reconstructing the conditional distribution of label `n`:
/// the source truncation, widened to leave room above `n`.
pub fn reconstruction_truncation(source: &SourceModel, label: u32) -> Result<usize> {
    let base = source.auto_truncation()?;
    Ok(base.max(label as usize + 12).min(MAX_TRUNCATION))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalReconstruction {
    pub events: u64,
    /// Detected idler distribution over `0..=truncation`.
    pub detected: Vec<f64>,
    pub distribution: PhotonNumberDistribution,
    /// Plug-in standard errors of the direct inversion.
    pub standard_errors: Vec<f64>,
}

/// Reconstructs the idler distribution of pulses heralded as `label`.
/// Returns `None` when there are no such pulses.
pub fn conditional_reconstruction(
    run: &ExperimentRun,
    cfg: &ExperimentConfig,
    classification: Classification,
    label: u32,
    truncation: usize,
    mode: ReconstructionMode,
    readout: Readout,
) -> Result<Option<ConditionalReconstruction>> {
    let events = run.label_count(classification, label);
    if events == 0 {
        return Ok(None);
    }
    let detected: Vec<f64> = match readout {
        Readout::Counts => {
            let row = run.conditional_counts(classification, label);
            (0..=truncation)
                .map(|i| row.get(i).copied().unwrap_or(0) as f64 / events as f64)
                .collect()
        }
        Readout::PeakFit => {
            let h = run
                .conditional_histogram(classification, label)
                .ok_or(Error::EmptyHistogram)?;
            // One peak per photon number up to the last populated one.
            let top = ((h.bin_high(h.len() - 1) / cfg.monitor.gain).round().max(0.0) as usize)
                .min(truncation);
            let fit = fit_peaks_with(
                &h,
                &FitOptions {
                    n_peaks: top + 1,
                    gain_hint: cfg.monitor.gain,
                    ..FitOptions::default()
                },
            )?;
            detected_distribution(&fit)?.resized(truncation)
        }
    };
    let distribution = reconstruct(
        &detected,
        cfg.monitor.efficiency,
        cfg.monitor.dark_mean,
        truncation,
        mode,
    )?;
    let standard_errors = standard_errors(
        &detected,
        events,
        cfg.monitor.efficiency,
        cfg.monitor.dark_mean,
        truncation,
    )?;
    Ok(Some(ConditionalReconstruction {
        events,
        detected,
        distribution,
        standard_errors,
    }))
}

/// Runs one experiment per pump power and evaluates each heralded label.
pub fn sweep(cfg: &SweepConfig, workers: usize) -> Result<SweepResult> {
    if cfg.powers_uw.is_empty() {
        return Err(Error::InvalidParameter {
            name: "powers_uw",
            value: 0.0,
            reason: "need at least one pump power",
        });
    }
    let template = &cfg.template;
    template.validate()?;
    let calibration =
        cfg.calibration
            .resolve(template.source.kind, &template.trigger, template.rep_rate_hz)?;

    let mut points = Vec::with_capacity(cfg.powers_uw.len());
    for (i, &power) in cfg.powers_uw.iter().enumerate() {
        let mean_pairs = calibration.slope * power;
        let mut point_cfg = template.clone();
        point_cfg.source = template.source.with_mean(mean_pairs)?;
        point_cfg.num_pulses = cfg.pulses_per_point;
        point_cfg.seed = crate::rng::derive_seed(template.seed, i as u64);
        point_cfg.keep_records = false;
        let run = run_experiment(&point_cfg, workers)?;

        let mut labels = Vec::with_capacity(cfg.labels.len());
        for &n in &cfg.labels {
            let truncation = reconstruction_truncation(&point_cfg.source, n)?;
            let heralds = run.label_count(cfg.classification, n);
            let pulses = run.pulses.max(1);
            let p = heralds as f64 / pulses as f64;
            let oracle = posterior_oracle(&point_cfg.source, &point_cfg.trigger, n as usize, truncation)
                .unwrap_or_else(|_| PhotonNumberDistribution::point_mass(n as usize, truncation));
            let rec = conditional_reconstruction(
                &run,
                &point_cfg,
                cfg.classification,
                n,
                truncation,
                cfg.mode,
                cfg.readout,
            )?;
            let fidelity = rec
                .as_ref()
                .map(|r| heralded_fidelity(&r.distribution, n as usize));
            labels.push(LabelResult {
                n,
                heralds,
                rate_hz: generation_rate(heralds, pulses, point_cfg.rep_rate_hz)?,
                rate_se_hz: point_cfg.rep_rate_hz * (p * (1.0 - p) / pulses as f64).sqrt(),
                truncation,
                reconstructed: rec.map(|r| r.distribution),
                fidelity_signed: fidelity.map(|f| f.signed),
                fidelity_clamped: fidelity.map(|f| f.clamped),
                fidelity_oracle: oracle.get(n as usize),
                oracle,
            });
        }
        points.push(SweepPoint {
            power_uw: power,
            mean_pairs,
            seed: point_cfg.seed,
            pulses: run.pulses,
            labels,
        });
    }
    Ok(SweepResult {
        calibration,
        classification: cfg.classification,
        readout: cfg.readout,
        mode: cfg.mode,
        seed: template.seed,
        points,
    })
}
