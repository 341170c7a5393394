//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion.
//!
//! Exits 0 regardless of outcome so the workspace test run stays usable;
//! set `ACCEPTANCE_STRICT=1` to exit 1 when any criterion fails.

use std::time::{Duration, Instant};

use fockgen::experiment::run_experiment;
use fockgen::io;
use fockgen::metrics::{
    conditional_reconstruction, heralded_fidelity, klyshko_efficiency, reconstruction_truncation,
    sweep, Calibration, CoincidenceCounts, ConditionalReconstruction, Readout,
};
use fockgen::reconstruct::{invert_counts, reconstruct, standard_errors};
use fockgen::transfer::DetectorTransfer;
use fockgen::{
    Classification, DetectorConfig, ExperimentConfig, ReconstructionMode, SourceModel,
    SweepConfig,
};
use rand::{Rng, SeedableRng};

const SEED: u64 = 20_240_601;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn trigger() -> DetectorConfig {
    // Darks on the herald are left out: a dark-triggered label cannot be
    // undone downstream and would cap every heralded fidelity.
    DetectorConfig::vlpc(0.68).with_dark(0.0)
}

fn monitor() -> DetectorConfig {
    DetectorConfig::vlpc(0.58)
}

fn lab(mean_pairs: f64, pulses: u64, seed: u64) -> ExperimentConfig {
    ExperimentConfig::new(
        SourceModel::poisson(mean_pairs).unwrap(),
        trigger(),
        monitor(),
        4,
        pulses,
        seed,
    )
    .unwrap()
}

fn round_trip() -> Outcome {
    let start = Instant::now();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(SEED);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let w: Vec<f64> = (0..=10).map(|_| rng.random::<f64>()).collect();
        let total: f64 = w.iter().sum();
        let p: Vec<f64> = w.iter().map(|x| x / total).collect();
        for eta in [0.3, 0.58, 0.9] {
            for d in [0.0, 0.01] {
                let t = DetectorTransfer::new(eta, d, 10).unwrap();
                let back = t.invert(&t.forward(&p)).unwrap();
                for (a, b) in back.iter().zip(&p) {
                    worst = worst.max((a - b).abs());
                }
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-9 && within(elapsed, 1.0),
        format!("max error {worst:.2e}, {elapsed:.2?}"),
    )
}

fn hand_check() -> Outcome {
    let p = invert_counts(&[0.25, 0.5, 0.25], 0.5, 0.0, 2).unwrap();
    let err = p
        .probs()
        .iter()
        .zip([0.0, 0.0, 1.0])
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    outcome(err <= 1e-12, format!("p = {:?}, max error {err:.2e}", p.probs()))
}

fn klyshko() -> Outcome {
    let start = Instant::now();
    let mut cfg = lab(0.01, 10_000_000, SEED);
    cfg.monitor = monitor().with_dark(0.0);
    let run = run_experiment(&cfg, 0).unwrap();
    let est = klyshko_efficiency(&CoincidenceCounts::from_run(&run)).unwrap();
    let elapsed = start.elapsed();
    let pass = (est.trigger - 0.68).abs() <= 0.005
        && (est.monitor - 0.58).abs() <= 0.005
        && within(elapsed, 30.0);
    outcome(
        pass,
        format!(
            "eta1 = {:.4}, eta2 = {:.4}, {elapsed:.2?}",
            est.trigger, est.monitor
        ),
    )
}

fn reconstruct_label(
    run: &fockgen::ExperimentRun,
    cfg: &ExperimentConfig,
    classification: Classification,
    label: u32,
    mode: ReconstructionMode,
) -> Option<ConditionalReconstruction> {
    let truncation = reconstruction_truncation(&cfg.source, label).unwrap();
    conditional_reconstruction(
        run,
        cfg,
        classification,
        label,
        truncation,
        mode,
        Readout::Counts,
    )
    .unwrap()
}

fn low_power_fidelity() -> Outcome {
    let start = Instant::now();
    let cfg = lab(0.1, 10_000_000, SEED + 4);
    let run = run_experiment(&cfg, 0).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for label in 1..=3u32 {
        let rec = reconstruct_label(&run, &cfg, Classification::Ideal, label, ReconstructionMode::Signed);
        match rec {
            Some(r) => {
                let f = heralded_fidelity(&r.distribution, label as usize).signed;
                let se = r.standard_errors[label as usize];
                pass &= f >= 0.95 - 0.02;
                parts.push(format!("F{label} = {f:.3} (se {se:.3}, {} heralds)", r.events));
            }
            None => {
                pass = false;
                parts.push(format!("F{label}: no heralds"));
            }
        }
    }
    let elapsed = start.elapsed();
    pass &= within(elapsed, 60.0);
    parts.push(format!("{elapsed:.2?}"));
    outcome(pass, parts.join(", "))
}

fn four_photon_smearing() -> Outcome {
    let cfg = lab(0.5, 10_000_000, SEED + 5);
    let run = run_experiment(&cfg, 0).unwrap();
    let fid = |c: Classification, n: u32| {
        reconstruct_label(&run, &cfg, c, n, ReconstructionMode::Signed)
            .map(|r| heralded_fidelity(&r.distribution, n as usize).signed)
            .unwrap_or(f64::NAN)
    };
    let (f2, f3, f4) = (
        fid(Classification::PulseHeight, 2),
        fid(Classification::PulseHeight, 3),
        fid(Classification::PulseHeight, 4),
    );
    let f4_ideal = fid(Classification::Ideal, 4);
    let pass = f4 < f2 && f4 < f3 && f4 <= f4_ideal - 0.05;
    outcome(
        pass,
        format!("pulse height F2 = {f2:.3}, F3 = {f3:.3}, F4 = {f4:.3}; ideal F4 = {f4_ideal:.3}"),
    )
}

fn mu_grid() -> Vec<f64> {
    (0..10)
        .map(|i| 0.01 * (200f64).powf(i as f64 / 9.0))
        .collect()
}

fn tradeoff_sweep() -> (fockgen::SweepResult, Duration) {
    let start = Instant::now();
    let mut cfg = SweepConfig::new(lab(0.01, 0, SEED + 6), mu_grid(), 1_000_000);
    cfg.calibration = Calibration::Slope { slope: 1.0 };
    cfg.classification = Classification::Ideal;
    let result = sweep(&cfg, 0).unwrap();
    (result, start.elapsed())
}

fn tradeoff_shape(result: &fockgen::SweepResult, elapsed: Duration) -> Outcome {
    let mut pass = within(elapsed, 300.0);
    let mut notes = Vec::new();
    for (li, n) in (1..=4u32).enumerate() {
        for w in result.points.windows(2) {
            let (a, b) = (&w[0].labels[li], &w[1].labels[li]);
            debug_assert_eq!(a.n, n);
            let se = (a.rate_se_hz.powi(2) + b.rate_se_hz.powi(2)).sqrt();
            if b.rate_hz < a.rate_hz - 5.0 * se {
                pass = false;
                notes.push(format!(
                    "rate{n} drops {:.0} -> {:.0} Hz (5 se = {:.0}) at mu {:.3} -> {:.3}",
                    a.rate_hz,
                    b.rate_hz,
                    5.0 * se,
                    w[0].mean_pairs,
                    w[1].mean_pairs
                ));
            }
            if b.fidelity_oracle > a.fidelity_oracle {
                pass = false;
                notes.push(format!(
                    "oracle F{n} rises at mu {:.3} -> {:.3}",
                    w[0].mean_pairs, w[1].mean_pairs
                ));
            }
        }
    }
    notes.push(format!("{elapsed:.2?}"));
    outcome(pass, notes.join("; "))
}

fn oracle_equivalence(result: &fockgen::SweepResult) -> Outcome {
    let mon = monitor();
    let mut worst: f64 = 0.0;
    let mut compared = 0usize;
    let mut skipped = 0usize;
    for point in &result.points {
        for lr in &point.labels {
            let Some(rec) = &lr.reconstructed else {
                skipped += 1;
                continue;
            };
            let t = DetectorTransfer::new(mon.efficiency, mon.dark_mean, lr.truncation).unwrap();
            // Expected detected frequencies, floored at one event so that
            // single stray counts in empty cells get a nonzero error bar.
            let floor = 1.0 / lr.heralds as f64;
            let f: Vec<f64> = t
                .forward(lr.oracle.probs())
                .into_iter()
                .map(|x| x.max(floor))
                .collect();
            let se = standard_errors(&f, lr.heralds, mon.efficiency, mon.dark_mean, lr.truncation)
                .unwrap();
            for ((got, want), s) in rec.probs().iter().zip(lr.oracle.probs()).zip(&se) {
                worst = worst.max((got - want).abs() / s);
                compared += 1;
            }
        }
    }
    outcome(
        worst <= 5.0,
        format!("largest deviation {worst:.2} se over {compared} entries, {skipped} empty labels"),
    )
}

fn negative_artifact() -> Outcome {
    let mut signed_hits = 0;
    let mut constrained_negative = 0;
    let mu = Calibration::Anchored {
        anchor_power_uw: 100.0,
        target_rate_hz: 11_800.0,
    }
    .resolve(fockgen::SourceKind::Poisson, &trigger(), 45_000.0)
    .unwrap()
    .anchor_mean_pairs
    .unwrap();
    for s in 0..20 {
        let cfg = lab(mu, 100_000, SEED + 100 + s);
        let run = run_experiment(&cfg, 0).unwrap();
        let mut any_signed = false;
        for label in 1..=4u32 {
            let Some(r) = reconstruct_label(&run, &cfg, Classification::PulseHeight, label, ReconstructionMode::Signed) else {
                continue;
            };
            any_signed |= r.distribution.has_negative();
            let c = reconstruct(
                &r.detected,
                cfg.monitor.efficiency,
                cfg.monitor.dark_mean,
                r.detected.len() - 1,
                ReconstructionMode::Constrained,
            )
            .unwrap();
            if c.has_negative() {
                constrained_negative += 1;
            }
        }
        signed_hits += any_signed as u32;
    }
    outcome(
        signed_hits >= 1 && constrained_negative == 0,
        format!(
            "mu = {mu:.3}: signed negative on {signed_hits}/20 seeds, constrained negative {constrained_negative} times"
        ),
    )
}

fn outputs(workers: usize) -> Vec<u8> {
    let mut cfg = lab(0.566, 300_000, SEED + 9);
    cfg.keep_records = true;
    let run = run_experiment(&cfg, workers).unwrap();
    let mut bytes = Vec::new();
    io::write_records(&mut bytes, &run.records).unwrap();
    io::write_histogram(&mut bytes, &run.trigger_hist.to_histogram()).unwrap();
    io::write_histogram(&mut bytes, &run.idler_hist.to_histogram()).unwrap();
    for h in run.idler_by_label.values() {
        io::write_histogram(&mut bytes, &h.to_histogram()).unwrap();
    }
    let mut sc = SweepConfig::new(lab(0.1, 0, SEED + 10), vec![50.0, 150.0], 200_000);
    sc.calibration = Calibration::Slope { slope: 0.004 };
    io::write_sweep(&mut bytes, &sweep(&sc, workers).unwrap()).unwrap();
    bytes
}

fn determinism() -> Outcome {
    let one = outputs(1);
    let eight = outputs(8);
    outcome(
        one == eight,
        format!("{} bytes with 1 worker, {} with 8", one.len(), eight.len()),
    )
}

fn main() {
    let mut failed = 0;
    let mut report = |id: u32, name: &str, o: Outcome| {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("{tag} {id} {name}: {}", o.detail);
        failed += (!o.pass) as u32;
    };
    report(1, "loss inversion round trip", round_trip());
    report(2, "hand-check inversion", hand_check());
    report(3, "Klyshko efficiencies", klyshko());
    report(4, "low-power heralded fidelity", low_power_fidelity());
    report(5, "four-photon smearing", four_photon_smearing());
    let (result, elapsed) = tradeoff_sweep();
    report(6, "rate/fidelity tradeoff", tradeoff_shape(&result, elapsed));
    report(7, "oracle equivalence", oracle_equivalence(&result));
    report(8, "negative probability artifact", negative_artifact());
    report(9, "determinism across workers", determinism());
    println!("{failed} of 9 criteria failed");
    if failed > 0 && std::env::var_os("ACCEPTANCE_STRICT").is_some_and(|v| v == "1") {
        std::process::exit(1);
    }
}
