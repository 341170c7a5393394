//! Shared fixtures for the criterion benchmarks.

use fockgen::{DetectorConfig, ExperimentConfig, SourceModel};

/// Lab-like apparatus: VLPC trigger (η = 0.68) and monitor (η = 0.58).
pub fn lab_config(mean_pairs: f64, pulses: u64) -> ExperimentConfig {
    ExperimentConfig::new(
        SourceModel::poisson(mean_pairs).expect("valid mean"),
        DetectorConfig::vlpc(0.68),
        DetectorConfig::vlpc(0.58),
        4,
        pulses,
        1,
    )
    .expect("valid config")
}
