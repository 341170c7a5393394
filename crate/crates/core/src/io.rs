//! File formats: CSV tables and JSON configuration.
//!
//! All CSVs are UTF-8, comma separated, `.` decimal, with a mandatory header
//! row. Floats are written in Rust's shortest round-trip form, so identical
//! runs produce byte-identical files.

use std::io::{Read, Write};

use serde::de::DeserializeOwned;

use crate::distribution::PhotonNumberDistribution;
use crate::error::{Error, Result};
use crate::experiment::PulseRecord;
use crate::histogram::Histogram;
use crate::metrics::SweepResult;

pub const RECORDS_HEADER: &str =
    "pulse_index,true_pairs,trigger_detected,trigger_height,trigger_label,idler_detected,idler_area";
pub const HISTOGRAM_HEADER: &str = "bin_low,bin_high,count";
pub const DISTRIBUTION_HEADER: &str = "n,probability";
pub const SWEEP_HEADER: &str =
    "power,mu,n,fidelity_signed,fidelity_clamped,fidelity_oracle,rate_hz";

pub fn write_records<W: Write>(mut w: W, records: &[PulseRecord]) -> Result<()> {
    writeln!(w, "{RECORDS_HEADER}")?;
    for (i, r) in records.iter().enumerate() {
        let label = r.trigger_label.map(|l| l.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            i,
            r.true_pairs,
            r.trigger_detected,
            r.trigger_height.0,
            label,
            r.idler_detected,
            r.idler_area.0
        )?;
    }
    Ok(())
}

pub fn write_histogram<W: Write>(mut w: W, h: &Histogram) -> Result<()> {
    writeln!(w, "{HISTOGRAM_HEADER}")?;
    for (i, c) in h.counts.iter().enumerate() {
        writeln!(w, "{},{},{}", h.bin_low(i), h.bin_high(i), c)?;
    }
    Ok(())
}

pub fn write_distribution<W: Write>(mut w: W, d: &PhotonNumberDistribution) -> Result<()> {
    writeln!(w, "{DISTRIBUTION_HEADER}")?;
    for (n, p) in d.probs().iter().enumerate() {
        writeln!(w, "{n},{p}")?;
    }
    Ok(())
}

pub fn write_sweep<W: Write>(mut w: W, result: &SweepResult) -> Result<()> {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    writeln!(w, "{SWEEP_HEADER}")?;
    for p in &result.points {
        for l in &p.labels {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                p.power_uw,
                p.mean_pairs,
                l.n,
                opt(l.fidelity_signed),
                opt(l.fidelity_clamped),
                l.fidelity_oracle,
                l.rate_hz
            )?;
        }
    }
    Ok(())
}

fn schema(line: u64, message: impl Into<String>) -> Error {
    Error::Schema {
        line,
        message: message.into(),
    }
}

/// Reads a histogram CSV. Bins must be contiguous and of equal width.
pub fn read_histogram<R: Read>(r: R) -> Result<Histogram> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(r);
    let headers = reader
        .headers()
        .map_err(|e| schema(1, format!("unreadable header: {e}")))?
        .clone();
    let names: Vec<&str> = headers.iter().collect();
    if names != ["bin_low", "bin_high", "count"] {
        return Err(schema(
            1,
            format!("expected header `{HISTOGRAM_HEADER}`, found `{}`", names.join(",")),
        ));
    }
    let mut bins: Vec<(f64, f64, f64)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            schema(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 3 {
            return Err(schema(line, format!("expected 3 fields, found {}", record.len())));
        }
        let field = |i: usize, name: &str| -> Result<f64> {
            record[i]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| schema(line, format!("{name} `{}` is not a finite number", &record[i])))
        };
        let (lo, hi, count) = (field(0, "bin_low")?, field(1, "bin_high")?, field(2, "count")?);
        if !(hi > lo) {
            return Err(schema(line, "bin_high must exceed bin_low"));
        }
        if count < 0.0 {
            return Err(schema(line, "count must be >= 0"));
        }
        if let Some(&(plo, phi, _)) = bins.last() {
            let width = phi - plo;
            let tol = 1e-6 * width;
            if (lo - phi).abs() > tol || ((hi - lo) - width).abs() > tol {
                return Err(schema(line, "bins must be contiguous and of equal width"));
            }
        }
        bins.push((lo, hi, count));
    }
    let Some(&(low, high, _)) = bins.first() else {
        return Err(Error::EmptyHistogram);
    };
    Histogram::new(low, high - low, bins.iter().map(|b| b.2).collect())
}

/// Parses JSON, reporting the line of the first error.
pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| schema(e.line() as u64, e.to_string()))
}
