use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn fockgen(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fockgen"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn lab_config(pulses: u64) -> Value {
    json!({
        "seed": 42,
        "source": { "kind": "poisson-multimode", "mean_pairs": 0.3 },
        "trigger": { "efficiency": 0.68, "dark_mean": 0.0 },
        "monitor": { "efficiency": 0.58 },
        "num_pulses": pulses,
        "sweep": { "powers_uw": [50.0], "pulses_per_point": 50000,
                   "calibration": { "slope": { "slope": 0.004 } } }
    })
}

fn write_config(dir: &Path, name: &str, cfg: &Value) -> String {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SIMULATE_FILES: [&str; 8] = [
    "records.csv",
    "trigger_hist.csv",
    "idler_hist_unconditioned.csv",
    "idler_hist_label_1.csv",
    "idler_hist_label_2.csv",
    "idler_hist_label_3.csv",
    "idler_hist_label_4.csv",
    "manifest.json",
];

#[test]
fn simulate_writes_every_file() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "cfg.json", &lab_config(20_000));
    let o = fockgen(&["simulate", "--config", &cfg, "--out", "run"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in SIMULATE_FILES {
        assert!(tmp.path().join("run").join(f).exists(), "missing {f}");
    }
    let records = read(&tmp.path().join("run"), "records.csv");
    assert_eq!(records.lines().count(), 20_001);
    let manifest: Value = serde_json::from_str(&read(&tmp.path().join("run"), "manifest.json")).unwrap();
    assert_eq!(manifest["seed"], 42);
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn reruns_are_byte_identical_across_worker_counts() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "cfg.json", &lab_config(150_000));
    for (out, workers) in [("a", "1"), ("b", "4"), ("c", "1")] {
        let o = fockgen(
            &["simulate", "--config", &cfg, "--out", out, "--workers", workers],
            tmp.path(),
        );
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for f in SIMULATE_FILES {
        let a = fs::read(tmp.path().join("a").join(f)).unwrap();
        assert_eq!(a, fs::read(tmp.path().join("b").join(f)).unwrap(), "{f}");
        assert_eq!(a, fs::read(tmp.path().join("c").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "cfg.json", &lab_config(5_000));
    fockgen(&["simulate", "--config", &cfg, "--out", "a"], tmp.path());
    let o = fockgen(&["simulate", "--config", &cfg, "--out", "b", "--seed", "9"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let m: Value = serde_json::from_str(&read(&tmp.path().join("b"), "manifest.json")).unwrap();
    assert_eq!(m["seed"], 9);
    assert_ne!(
        read(&tmp.path().join("a"), "records.csv"),
        read(&tmp.path().join("b"), "records.csv")
    );
}

#[test]
fn zero_pulses_gives_header_only_files() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "cfg.json", &lab_config(0));
    let o = fockgen(&["simulate", "--config", &cfg, "--out", "run"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let dir = tmp.path().join("run");
    assert_eq!(
        read(&dir, "records.csv"),
        "pulse_index,true_pairs,trigger_detected,trigger_height,trigger_label,idler_detected,idler_area\n"
    );
    for f in &SIMULATE_FILES[1..7] {
        assert_eq!(read(&dir, f), "bin_low,bin_high,count\n", "{f}");
    }
}

#[test]
fn unknown_config_key_is_a_config_error_with_line() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("cfg.json");
    fs::write(
        &path,
        "{\n  \"seed\": 1,\n  \"source\": { \"mean_pairs\": 0.1 },\n  \"trigger\": { \"efficiency\": 0.7 },\n  \"monitor\": { \"efficiency\": 0.6, \"gian\": 1.0 }\n}\n",
    )
    .unwrap();
    let o = fockgen(&["simulate", "--config", "cfg.json"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("line 5"), "{err}");
    assert!(err.contains("unknown field `gian`"), "{err}");
}

#[test]
fn missing_config_file_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let o = fockgen(&["simulate", "--config", "nope.json"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn invalid_parameter_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let mut c = lab_config(10);
    c["monitor"]["efficiency"] = json!(1.5);
    let cfg = write_config(tmp.path(), "cfg.json", &c);
    let o = fockgen(&["simulate", "--config", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

fn simulate_histogram(tmp: &Path, monitor: Value) -> String {
    let mut c = lab_config(200_000);
    c["source"]["mean_pairs"] = json!(0.1);
    c["monitor"] = monitor;
    c["records"] = json!(false);
    let cfg = write_config(tmp, "cfg.json", &c);
    let o = fockgen(&["simulate", "--config", &cfg, "--out", "sim"], tmp);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    "sim/idler_hist_unconditioned.csv".to_string()
}

#[test]
fn reconstruct_with_perfect_monitor_returns_normalized_areas() {
    let tmp = TempDir::new().unwrap();
    let hist = simulate_histogram(
        tmp.path(),
        json!({ "efficiency": 1.0, "dark_mean": 0.0 }),
    );
    let o = fockgen(
        &["reconstruct", "--histogram", &hist, "--efficiency", "1", "--truncation", "3", "--out", "rec"],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let dir = tmp.path().join("rec");
    let report: Value = serde_json::from_str(&read(&dir, "fit_report.json")).unwrap();
    let areas: Vec<f64> = report["fit"]["peaks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["area"].as_f64().unwrap())
        .collect();
    let total: f64 = areas.iter().sum();
    let dist = read(&dir, "distribution.csv");
    let probs: Vec<f64> = dist
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(probs.len(), 4);
    for (p, a) in probs.iter().zip(&areas) {
        assert!((p - a / total).abs() < 1e-12);
    }
    assert_eq!(report["condition_number"], 1.0);
    assert!(report["provenance"]["config_sha256"].is_string());
}

#[test]
fn reconstruct_recovers_source_statistics() {
    let tmp = TempDir::new().unwrap();
    let hist = simulate_histogram(tmp.path(), json!({ "efficiency": 0.58 }));
    let o = fockgen(
        &[
            "reconstruct", "--histogram", &hist, "--efficiency", "0.58", "--dark-mean", "0.01",
            "--truncation", "3", "--mode", "constrained", "--out", "rec",
        ],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let dist = read(&tmp.path().join("rec"), "distribution.csv");
    let probs: Vec<f64> = dist
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    let poisson = [0.904837, 0.0904837, 0.00452419, 0.000150806];
    for (p, q) in probs.iter().zip(poisson) {
        assert!((p - q).abs() < 0.01, "{probs:?}");
        assert!(*p >= 0.0);
    }
}

#[test]
fn malformed_histogram_names_the_line() {
    let tmp = TempDir::new().unwrap();
    fs::write(
        tmp.path().join("h.csv"),
        "bin_low,bin_high,count\n0,0.5,10\n0.5,1,abc\n",
    )
    .unwrap();
    let o = fockgen(&["reconstruct", "--histogram", "h.csv", "--efficiency", "0.5"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn numerical_failure_exits_3_and_still_reports() {
    let tmp = TempDir::new().unwrap();
    let hist = simulate_histogram(tmp.path(), json!({ "efficiency": 0.58 }));
    let o = fockgen(
        &["reconstruct", "--histogram", &hist, "--efficiency", "0", "--truncation", "2", "--out", "rec"],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let report: Value = serde_json::from_str(&read(&tmp.path().join("rec"), "fit_report.json")).unwrap();
    assert!(report["error"].as_str().unwrap().contains("singular"));
    assert!(!tmp.path().join("rec/distribution.csv").exists());
}

#[test]
fn sweep_single_power_one_row_per_label() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "cfg.json", &lab_config(0));
    let o = fockgen(&["sweep", "--config", &cfg, "--out", "sw"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = read(&tmp.path().join("sw"), "sweep.csv");
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "power,mu,n,fidelity_signed,fidelity_clamped,fidelity_oracle,rate_hz");
    assert_eq!(lines.len(), 5);
    let meta: Value = serde_json::from_str(&read(&tmp.path().join("sw"), "metadata.json")).unwrap();
    assert_eq!(meta["calibration"]["slope"], 0.004);
    assert_eq!(meta["provenance"]["seed"], 42);
}

#[test]
fn sweep_without_section_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let mut c = lab_config(0);
    c.as_object_mut().unwrap().remove("sweep");
    let cfg = write_config(tmp.path(), "cfg.json", &c);
    let o = fockgen(&["sweep", "--config", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn klyshko_ideal_detectors_give_exactly_one() {
    let tmp = TempDir::new().unwrap();
    let mut c = lab_config(20_000);
    c["trigger"] = json!({ "efficiency": 1.0, "dark_mean": 0.0 });
    c["monitor"] = json!({ "efficiency": 1.0, "dark_mean": 0.0 });
    let cfg = write_config(tmp.path(), "cfg.json", &c);
    let o = fockgen(&["klyshko", "--config", &cfg, "--out", "k"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r: Value = serde_json::from_str(&read(&tmp.path().join("k"), "klyshko.json")).unwrap();
    assert_eq!(r["report"]["raw"]["trigger"], 1.0);
    assert_eq!(r["report"]["raw"]["monitor"], 1.0);
}

#[test]
fn klyshko_zero_singles_is_reported() {
    let tmp = TempDir::new().unwrap();
    let mut c = lab_config(1_000);
    c["source"]["mean_pairs"] = json!(0.0);
    c["monitor"] = json!({ "efficiency": 0.58, "dark_mean": 0.0 });
    let cfg = write_config(tmp.path(), "cfg.json", &c);
    let o = fockgen(&["klyshko", "--config", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("zero singles"), "{}", stderr(&o));
}

#[test]
fn bad_mode_rejected_by_argument_parser() {
    let tmp = TempDir::new().unwrap();
    let o = fockgen(&["reconstruct", "--mode", "fancy"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}
