use std::path::{Path, PathBuf};

use fockgen::experiment::run_experiment;
use fockgen::io;
use fockgen::metrics::{klyshko_dark_corrected, sweep};
use fockgen::reconstruct::{
    condition_report, detected_distribution, fit_peaks_with, reconstruct, FitOptions,
};
use fockgen::{CoincidenceCounts, Error, PeakFit, ReconstructionMode, MAX_TRUNCATION};
use serde::Serialize;

use crate::config::{load, ReconstructConfig, RunConfig};
use crate::provenance::{sha256_hex, OutputDir, Provenance};
use crate::{CliError, Common, ReconstructArgs};

const DEFAULT_OUT: &str = "out";

struct Resolved {
    cfg: RunConfig,
    out: PathBuf,
    workers: usize,
}

fn resolve(common: &Common) -> Result<Resolved, CliError> {
    let path = common
        .config
        .as_deref()
        .ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let (mut cfg, _): (RunConfig, _) = load(path)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let out = common
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let workers = common.workers.or(cfg.workers).unwrap_or(0);
    // Where results go and how many threads produce them do not change
    // them, so neither enters the hash.
    cfg.out = None;
    cfg.workers = None;
    Ok(Resolved { cfg, out, workers })
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> fockgen::Result<()>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

pub fn simulate(common: &Common) -> Result<(), CliError> {
    let Resolved { cfg, out, workers } = resolve(common)?;
    let exp = cfg.experiment()?;
    let mut dir = OutputDir::create(&out, Provenance::new("simulate", Some(cfg.seed), &cfg))?;
    let run = run_experiment(&exp, workers)?;

    if cfg.records {
        dir.write("records.csv", &csv_bytes(|b| io::write_records(b, &run.records))?)?;
    }
    dir.write(
        "trigger_hist.csv",
        &csv_bytes(|b| io::write_histogram(b, &run.trigger_hist.to_histogram()))?,
    )?;
    dir.write(
        "idler_hist_unconditioned.csv",
        &csv_bytes(|b| io::write_histogram(b, &run.idler_hist.to_histogram()))?,
    )?;
    let empty = fockgen::Histogram::new(0.0, 1.0, Vec::new())?;
    for label in exp.windows.labels() {
        let h = run
            .conditional_histogram(fockgen::Classification::PulseHeight, label)
            .unwrap_or_else(|| empty.clone());
        dir.write(
            &format!("idler_hist_label_{label}.csv"),
            &csv_bytes(|b| io::write_histogram(b, &h))?,
        )?;
    }
    eprintln!(
        "simulated {} pulses, {} labeled, wrote {}",
        run.pulses,
        run.pulses - run.unlabeled,
        out.display()
    );
    dir.finish()
}

pub fn sweep_cmd(common: &Common) -> Result<(), CliError> {
    let Resolved { mut cfg, out, workers } = resolve(common)?;
    if let (Some(mode), Some(spec)) = (common.mode, cfg.sweep.as_mut()) {
        spec.mode = Some(mode);
    }
    let sc = cfg.sweep()?;
    let mut dir = OutputDir::create(&out, Provenance::new("sweep", Some(cfg.seed), &cfg))?;
    let result = sweep(&sc, workers)?;
    dir.write("sweep.csv", &csv_bytes(|b| io::write_sweep(b, &result))?)?;
    dir.write_json("metadata.json", &result)?;
    dir.finish()
}

#[derive(Serialize)]
struct KlyshkoOutput {
    pulses: u64,
    report: fockgen::metrics::KlyshkoReport,
}

pub fn klyshko(common: &Common) -> Result<(), CliError> {
    let Resolved { cfg, out, workers } = resolve(common)?;
    let mut exp = cfg.experiment()?;
    exp.keep_records = false;
    let mut dir = OutputDir::create(&out, Provenance::new("klyshko", Some(cfg.seed), &cfg))?;
    let run = run_experiment(&exp, workers)?;
    let counts = CoincidenceCounts::from_run(&run);
    let report = klyshko_dark_corrected(&counts, exp.trigger.dark_mean, exp.monitor.dark_mean)?;
    println!(
        "eta_trigger = {:.6}, eta_monitor = {:.6} (singles {} / {}, coincidences {})",
        report.raw.trigger,
        report.raw.monitor,
        counts.singles_1,
        counts.singles_2,
        counts.coincidences
    );
    dir.write_json(
        "klyshko.json",
        &KlyshkoOutput {
            pulses: run.pulses,
            report,
        },
    )?;
    dir.finish()
}

#[derive(Debug, Clone, Serialize)]
struct ReconstructParams {
    histogram_sha256: String,
    efficiency: f64,
    dark_mean: f64,
    truncation: usize,
    n_peaks: usize,
    gain_hint: f64,
    shared_spacing: bool,
    mode: ReconstructionMode,
}

#[derive(Serialize)]
struct FitReport<'a> {
    histogram: &'a Path,
    parameters: &'a ReconstructParams,
    fit: Option<&'a PeakFit>,
    detected: Option<Vec<f64>>,
    condition_number: Option<f64>,
    error: Option<String>,
}

fn merge_reconstruct(args: &ReconstructArgs) -> Result<ReconstructConfig, CliError> {
    let mut rc: ReconstructConfig = match &args.common.config {
        Some(path) => load(path)?.0,
        None => ReconstructConfig::default(),
    };
    macro_rules! take {
        ($field:ident) => {
            if let Some(v) = args.$field.clone() {
                rc.$field = Some(v);
            }
        };
    }
    take!(histogram);
    take!(efficiency);
    take!(dark_mean);
    take!(truncation);
    take!(n_peaks);
    take!(gain_hint);
    rc.shared_spacing |= args.shared_spacing;
    if let Some(m) = args.common.mode {
        rc.mode = Some(m);
    }
    if let Some(s) = args.common.seed {
        rc.seed = Some(s);
    }
    if let Some(o) = &args.common.out {
        rc.out = Some(o.clone());
    }
    Ok(rc)
}

pub fn reconstruct_cmd(args: &ReconstructArgs) -> Result<(), CliError> {
    let rc = merge_reconstruct(args)?;
    let hist_path = rc
        .histogram
        .clone()
        .ok_or_else(|| CliError::Config("a histogram CSV is required (--histogram)".into()))?;
    let efficiency = rc
        .efficiency
        .ok_or_else(|| CliError::Config("the efficiency is required (--efficiency)".into()))?;
    let bytes = std::fs::read(&hist_path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", hist_path.display())))?;
    let h = io::read_histogram(bytes.as_slice())
        .map_err(|e| CliError::Input(format!("{}: {e}", hist_path.display()), e))?;
    let gain_hint = rc.gain_hint.unwrap_or(1.0);
    if !(gain_hint > 0.0) || !gain_hint.is_finite() {
        return Err(CliError::Config(format!("gain_hint must be finite and > 0, got {gain_hint}")));
    }
    // Default: one peak per gain step up to the top of the histogram.
    let n_peaks = match (rc.n_peaks, rc.truncation) {
        (Some(n), _) => n,
        (None, Some(t)) => t + 1,
        (None, None) => {
            let top = (h.bin_high(h.len().saturating_sub(1)) / gain_hint).round().max(0.0);
            (top as usize).min(MAX_TRUNCATION) + 1
        }
    };
    let params = ReconstructParams {
        histogram_sha256: sha256_hex(&bytes),
        efficiency,
        dark_mean: rc.dark_mean.unwrap_or(0.0),
        truncation: rc.truncation.unwrap_or(n_peaks.saturating_sub(1)),
        n_peaks,
        gain_hint,
        shared_spacing: rc.shared_spacing,
        mode: rc.mode.unwrap_or_default(),
    };
    let out = rc.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let mut dir = OutputDir::create(&out, Provenance::new("reconstruct", rc.seed, &params))?;

    let condition = condition_report(params.efficiency, params.dark_mean, params.truncation);
    let fit = fit_peaks_with(
        &h,
        &FitOptions {
            n_peaks: params.n_peaks,
            gain_hint: params.gain_hint,
            shared_spacing: params.shared_spacing,
            ..FitOptions::default()
        },
    );
    let outcome = fit.and_then(|fit| {
        let detected = detected_distribution(&fit)?;
        let p = reconstruct(
            detected.probs(),
            params.efficiency,
            params.dark_mean,
            params.truncation,
            params.mode,
        )?;
        Ok((fit, detected, p))
    });

    let (fit_for_report, detected, error) = match &outcome {
        Ok((fit, detected, _)) => (Some(fit), Some(detected.probs().to_vec()), None),
        Err(Error::FitNotConverged { fit, .. }) => (Some(fit.as_ref()), None, outcome.as_ref().err()),
        Err(e) => (None, None, Some(e)),
    };
    let report = FitReport {
        histogram: &hist_path,
        parameters: &params,
        fit: fit_for_report,
        detected,
        condition_number: condition.as_ref().ok().copied(),
        error: error.map(|e| e.to_string()),
    };
    dir.write_json("fit_report.json", &report)?;
    match outcome {
        Ok((_, _, p)) => {
            dir.write("distribution.csv", &csv_bytes(|b| io::write_distribution(b, &p))?)?;
            dir.finish()
        }
        Err(e) => {
            dir.finish()?;
            Err(e.into())
        }
    }
}
