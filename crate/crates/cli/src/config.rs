//! JSON run configuration. Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use fockgen::experiment::{default_windows, ScaWindows};
use fockgen::metrics::{Calibration, Readout};
use fockgen::{
    Classification, DetectorConfig, ExperimentConfig, PumpCalibration,
    ReconstructionMode, SourceKind, SourceModel, SweepConfig, DEFAULT_REP_RATE_HZ,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Pair source, given either directly as a mean pair number or through a
/// pump calibration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    #[serde(default = "default_kind")]
    pub kind: SourceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_pairs: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pump: Option<PumpCalibration>,
}

fn default_kind() -> SourceKind {
    SourceKind::Poisson
}

impl SourceSpec {
    pub fn model(&self) -> Result<SourceModel, CliError> {
        let mean_pairs = match (self.mean_pairs, &self.pump) {
            (Some(mu), None) => mu,
            (None, Some(pump)) => pump.mean_pairs()?,
            (Some(_), Some(_)) => {
                return Err(CliError::Config(
                    "source: give either mean_pairs or pump, not both".into(),
                ))
            }
            (None, None) => {
                return Err(CliError::Config("source: mean_pairs or pump is required".into()))
            }
        };
        Ok(SourceModel::new(self.kind, mean_pairs)?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub powers_uw: Vec<f64>,
    /// Defaults to the top-level `num_pulses`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pulses_per_point: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<Calibration>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classification: Option<Classification>,
    #[serde(default)]
    pub readout: Readout,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<ReconstructionMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<u32>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub source: SourceSpec,
    pub trigger: DetectorConfig,
    pub monitor: DetectorConfig,
    /// Explicit SCA windows; derived from the trigger when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub windows: Option<ScaWindows>,
    /// Highest label of the derived windows.
    #[serde(default = "default_window_max")]
    pub window_max: u32,
    #[serde(default)]
    pub num_pulses: u64,
    #[serde(default = "default_rep_rate")]
    pub rep_rate_hz: f64,
    /// Write the per-pulse record stream (`simulate` only).
    #[serde(default = "default_true")]
    pub records: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

fn default_window_max() -> u32 {
    4
}

fn default_rep_rate() -> f64 {
    DEFAULT_REP_RATE_HZ
}

fn default_true() -> bool {
    true
}

impl RunConfig {
    pub fn experiment(&self) -> Result<ExperimentConfig, CliError> {
        let windows = match &self.windows {
            Some(w) => w.clone(),
            None => default_windows(&self.trigger, self.window_max)?,
        };
        let cfg = ExperimentConfig {
            source: self.source.model()?,
            trigger: self.trigger,
            monitor: self.monitor,
            windows,
            num_pulses: self.num_pulses,
            rep_rate_hz: self.rep_rate_hz,
            seed: self.seed,
            keep_records: self.records,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn sweep(&self) -> Result<SweepConfig, CliError> {
        let spec = self
            .sweep
            .as_ref()
            .ok_or_else(|| CliError::Config("the sweep command needs a `sweep` section".into()))?;
        let mut template = self.experiment()?;
        template.keep_records = false;
        let mut cfg = SweepConfig::new(
            template,
            spec.powers_uw.clone(),
            spec.pulses_per_point.unwrap_or(self.num_pulses),
        );
        if let Some(c) = spec.calibration {
            cfg.calibration = c;
        }
        if let Some(c) = spec.classification {
            cfg.classification = c;
        }
        cfg.readout = spec.readout;
        if let Some(m) = spec.mode {
            cfg.mode = m;
        }
        if let Some(l) = &spec.labels {
            cfg.labels = l.clone();
        }
        Ok(cfg)
    }
}

/// Parameters of the `reconstruct` command, from a config file and/or flags.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histogram: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub efficiency: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dark_mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_peaks: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain_hint: Option<f64>,
    #[serde(default)]
    pub shared_spacing: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<ReconstructionMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

/// Reads and parses a JSON config, naming the file in errors.
pub fn load<T: serde::de::DeserializeOwned>(path: &Path) -> Result<(T, Vec<u8>), CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| CliError::Config(format!("{}: not valid UTF-8", path.display())))?;
    let parsed = fockgen::io::from_json(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok((parsed, bytes))
}
