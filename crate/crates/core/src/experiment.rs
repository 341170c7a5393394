//! Pulse-by-pulse Monte Carlo of the heralding apparatus.
//!
//! Each pump pulse draws one pair number. The same number of photons enters
//! the trigger (signal) and monitor (idler) detector chains, which are sampled
//! independently. The trigger pulse height is classified against the SCA
//! windows; the idler pulse area is histogrammed per trigger label.
//!
//! Runs are split into shards of [`SHARD_PULSES`] pulses. Shard `i` uses
//! random stream `i` of the run seed and shard outputs are merged in index
//! order, so a run is bit-identical for any worker count.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{DetectorChain, DetectorConfig, PulseHeight};
use crate::error::{Error, Result};
use crate::histogram::{BinnedCounts, Histogram};
use crate::rng;
use crate::source::{PairSampler, SourceModel};
use crate::{DEFAULT_REP_RATE_HZ, MAX_TRUNCATION};

pub const SHARD_PULSES: u64 = 1 << 16;

/// Histogram bins per gain unit.
pub const BINS_PER_GAIN: f64 = 50.0;

/// One SCA acceptance window `[low, high)` for photon number `label`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaWindow {
    pub label: u32,
    pub low: PulseHeight,
    pub high: PulseHeight,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ScaWindow>", into = "Vec<ScaWindow>")]
pub struct ScaWindows(Vec<ScaWindow>);

impl TryFrom<Vec<ScaWindow>> for ScaWindows {
    type Error = Error;

    fn try_from(windows: Vec<ScaWindow>) -> Result<Self> {
        ScaWindows::new(windows)
    }
}

impl From<ScaWindows> for Vec<ScaWindow> {
    fn from(w: ScaWindows) -> Self {
        w.0
    }
}

impl ScaWindows {
    /// Windows must be non-empty intervals, sorted and pairwise disjoint.
    pub fn new(windows: Vec<ScaWindow>) -> Result<Self> {
        for w in &windows {
            if !(w.low.0 < w.high.0) {
                return Err(Error::WindowOverlap(format!(
                    "window for n = {} has low {} >= high {}",
                    w.label, w.low.0, w.high.0
                )));
            }
        }
        for pair in windows.windows(2) {
            if pair[1].low.0 < pair[0].high.0 {
                return Err(Error::WindowOverlap(format!(
                    "window for n = {} [{}, {}) overlaps or precedes n = {} [{}, {})",
                    pair[1].label,
                    pair[1].low.0,
                    pair[1].high.0,
                    pair[0].label,
                    pair[0].low.0,
                    pair[0].high.0
                )));
            }
        }
        Ok(Self(windows))
    }

    pub fn windows(&self) -> &[ScaWindow] {
        &self.0
    }

    /// Label of the window containing `height`, if any.
    pub fn classify(&self, height: PulseHeight) -> Option<u32> {
        let x = height.0;
        let idx = self.0.partition_point(|w| w.high.0 <= x);
        self.0
            .get(idx)
            .filter(|w| w.low.0 <= x)
            .map(|w| w.label)
    }

    pub fn labels(&self) -> impl Iterator<Item = u32> + '_ {
        self.0.iter().map(|w| w.label)
    }
}

/// Windows for `n = 1..=n_max` centered at `n G` with half-width
/// `min(G/2, 3 σ_n)`. A noise-free peak (`σ_n = 0`) gets the full `G/2`.
pub fn default_windows(cfg: &DetectorConfig, n_max: u32) -> Result<ScaWindows> {
    cfg.validate()?;
    if n_max < 1 {
        return Err(Error::InvalidParameter {
            name: "n_max",
            value: n_max as f64,
            reason: "need at least one window",
        });
    }
    if n_max as usize > MAX_TRUNCATION {
        return Err(Error::TruncationTooLarge {
            truncation: n_max as usize,
            cap: MAX_TRUNCATION,
        });
    }
    let g = cfg.gain;
    let windows = (1..=n_max)
        .map(|n| {
            let sigma = cfg.height_sigma(n);
            let half = if sigma > 0.0 {
                (g / 2.0).min(3.0 * sigma)
            } else {
                g / 2.0
            };
            let center = n as f64 * g;
            ScaWindow {
                label: n,
                low: PulseHeight(center - half),
                high: PulseHeight(center + half),
            }
        })
        .collect();
    ScaWindows::new(windows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseRecord {
    pub true_pairs: u32,
    pub trigger_detected: u32,
    pub trigger_height: PulseHeight,
    pub trigger_label: Option<u32>,
    pub idler_detected: u32,
    pub idler_area: PulseHeight,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub source: SourceModel,
    pub trigger: DetectorConfig,
    pub monitor: DetectorConfig,
    pub windows: ScaWindows,
    pub num_pulses: u64,
    #[serde(default = "default_rep_rate")]
    pub rep_rate_hz: f64,
    pub seed: u64,
    /// Retain every [`PulseRecord`]; off for long statistics-only runs.
    #[serde(default)]
    pub keep_records: bool,
}

fn default_rep_rate() -> f64 {
    DEFAULT_REP_RATE_HZ
}

impl ExperimentConfig {
    /// Configuration with SCA windows derived from the trigger detector.
    pub fn new(
        source: SourceModel,
        trigger: DetectorConfig,
        monitor: DetectorConfig,
        window_max: u32,
        num_pulses: u64,
        seed: u64,
    ) -> Result<Self> {
        let cfg = Self {
            windows: default_windows(&trigger, window_max)?,
            source,
            trigger,
            monitor,
            num_pulses,
            rep_rate_hz: DEFAULT_REP_RATE_HZ,
            seed,
            keep_records: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        self.trigger.validate()?;
        self.monitor.validate()?;
        if !(self.rep_rate_hz > 0.0) || !self.rep_rate_hz.is_finite() {
            return Err(Error::InvalidParameter {
                name: "rep_rate_hz",
                value: self.rep_rate_hz,
                reason: "must be finite and > 0",
            });
        }
        Ok(())
    }

    pub fn apparatus(&self) -> Result<Apparatus> {
        self.validate()?;
        Ok(Apparatus {
            pairs: self.source.sampler(),
            trigger: self.trigger.chain()?,
            monitor: self.monitor.chain()?,
            windows: self.windows.clone(),
        })
    }
}

/// An [`ExperimentConfig`] with its samplers prepared.
#[derive(Debug, Clone)]
pub struct Apparatus {
    pairs: PairSampler,
    trigger: DetectorChain,
    monitor: DetectorChain,
    windows: ScaWindows,
}

/// Simulates one pump pulse.
pub fn run_pulse<R: Rng + ?Sized>(apparatus: &Apparatus, rng: &mut R) -> PulseRecord {
    let true_pairs = apparatus.pairs.sample(rng);
    let (trigger_detected, trigger_height) = apparatus.trigger.detect(true_pairs, rng);
    let (idler_detected, idler_area) = apparatus.monitor.detect(true_pairs, rng);
    PulseRecord {
        true_pairs,
        trigger_detected,
        trigger_height,
        trigger_label: apparatus.windows.classify(trigger_height),
        idler_detected,
        idler_area,
    }
}

/// Integer contingency table with rows and columns that grow on demand.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct JointCounts {
    rows: Vec<Vec<u64>>,
}

impl JointCounts {
    pub fn add(&mut self, row: u32, col: u32) {
        let (r, c) = (row as usize, col as usize);
        if r >= self.rows.len() {
            self.rows.resize(r + 1, Vec::new());
        }
        let cells = &mut self.rows[r];
        if c >= cells.len() {
            cells.resize(c + 1, 0);
        }
        cells[c] += 1;
    }

    pub fn merge(&mut self, other: &JointCounts) {
        if other.rows.len() > self.rows.len() {
            self.rows.resize(other.rows.len(), Vec::new());
        }
        for (mine, theirs) in self.rows.iter_mut().zip(&other.rows) {
            if theirs.len() > mine.len() {
                mine.resize(theirs.len(), 0);
            }
            for (a, b) in mine.iter_mut().zip(theirs) {
                *a += b;
            }
        }
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Row `row`, empty when never filled.
    pub fn row(&self, row: u32) -> &[u64] {
        self.rows.get(row as usize).map_or(&[], |r| r.as_slice())
    }

    pub fn row_total(&self, row: u32) -> u64 {
        self.row(row).iter().sum()
    }

    pub fn get(&self, row: u32, col: u32) -> u64 {
        self.row(row).get(col as usize).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.rows.iter().flatten().sum()
    }

    /// Sum over rows of each column.
    pub fn column_totals(&self) -> Vec<u64> {
        let width = self.rows.iter().map(Vec::len).max().unwrap_or(0);
        let mut out = vec![0; width];
        for r in &self.rows {
            for (o, v) in out.iter_mut().zip(r) {
                *o += v;
            }
        }
        out
    }
}

/// How a pulse is assigned its heralded photon number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    /// Perfect resolution: the label is the trigger's detected count.
    Ideal,
    /// SCA windows on the trigger pulse height.
    PulseHeight,
}

/// Aggregated output of [`run_experiment`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRun {
    pub pulses: u64,
    /// Only filled when [`ExperimentConfig::keep_records`] is set.
    pub records: Vec<PulseRecord>,
    pub trigger_hist: BinnedCounts,
    /// Idler pulse areas with no post-selection.
    pub idler_hist: BinnedCounts,
    /// Idler pulse areas keyed by SCA label.
    pub idler_by_label: BTreeMap<u32, BinnedCounts>,
    /// Idler pulse areas keyed by trigger detected count.
    pub idler_by_detected: BTreeMap<u32, BinnedCounts>,
    /// Rows: trigger detected count, columns: idler detected count.
    pub detected: JointCounts,
    /// Rows: SCA label, columns: idler detected count. Unlabeled pulses excluded.
    pub labeled: JointCounts,
    /// Rows: trigger detected count, columns: true pair number.
    pub true_pairs: JointCounts,
    pub unlabeled: u64,
}

impl ExperimentRun {
    fn empty(cfg: &ExperimentConfig) -> Self {
        Self {
            pulses: 0,
            records: Vec::new(),
            trigger_hist: BinnedCounts::new(cfg.trigger.gain / BINS_PER_GAIN),
            idler_hist: BinnedCounts::new(cfg.monitor.gain / BINS_PER_GAIN),
            idler_by_label: BTreeMap::new(),
            idler_by_detected: BTreeMap::new(),
            detected: JointCounts::default(),
            labeled: JointCounts::default(),
            true_pairs: JointCounts::default(),
            unlabeled: 0,
        }
    }

    fn record(&mut self, r: &PulseRecord, keep: bool) {
        self.pulses += 1;
        let width = self.idler_hist.width();
        self.trigger_hist.add(r.trigger_height.0);
        self.idler_hist.add(r.idler_area.0);
        self.detected.add(r.trigger_detected, r.idler_detected);
        self.true_pairs.add(r.trigger_detected, r.true_pairs);
        self.idler_by_detected
            .entry(r.trigger_detected)
            .or_insert_with(|| BinnedCounts::new(width))
            .add(r.idler_area.0);
        match r.trigger_label {
            Some(label) => {
                self.labeled.add(label, r.idler_detected);
                self.idler_by_label
                    .entry(label)
                    .or_insert_with(|| BinnedCounts::new(width))
                    .add(r.idler_area.0);
            }
            None => self.unlabeled += 1,
        }
        if keep {
            self.records.push(*r);
        }
    }

    fn merge(&mut self, other: ExperimentRun) {
        self.pulses += other.pulses;
        self.records.extend(other.records);
        self.trigger_hist.merge(&other.trigger_hist);
        self.idler_hist.merge(&other.idler_hist);
        for (dst, src) in [
            (&mut self.idler_by_label, &other.idler_by_label),
            (&mut self.idler_by_detected, &other.idler_by_detected),
        ] {
            for (k, h) in src {
                dst.entry(*k)
                    .and_modify(|mine| mine.merge(h))
                    .or_insert_with(|| h.clone());
            }
        }
        self.detected.merge(&other.detected);
        self.labeled.merge(&other.labeled);
        self.true_pairs.merge(&other.true_pairs);
        self.unlabeled += other.unlabeled;
    }

    /// Number of pulses heralded as `label`.
    pub fn label_count(&self, classification: Classification, label: u32) -> u64 {
        match classification {
            Classification::Ideal => self.detected.row_total(label),
            Classification::PulseHeight => self.labeled.row_total(label),
        }
    }

    /// Idler detected-count tallies for pulses heralded as `label`.
    pub fn conditional_counts(&self, classification: Classification, label: u32) -> &[u64] {
        match classification {
            Classification::Ideal => self.detected.row(label),
            Classification::PulseHeight => self.labeled.row(label),
        }
    }

    /// Idler pulse-area histogram for pulses heralded as `label`.
    pub fn conditional_histogram(
        &self,
        classification: Classification,
        label: u32,
    ) -> Option<Histogram> {
        let map = match classification {
            Classification::Ideal => &self.idler_by_detected,
            Classification::PulseHeight => &self.idler_by_label,
        };
        map.get(&label).map(BinnedCounts::to_histogram)
    }
}

fn run_shard(apparatus: &Apparatus, cfg: &ExperimentConfig, shard: u64) -> ExperimentRun {
    let start = shard * SHARD_PULSES;
    let end = (start + SHARD_PULSES).min(cfg.num_pulses);
    let mut rng = rng::stream(cfg.seed, shard);
    let mut out = ExperimentRun::empty(cfg);
    if cfg.keep_records {
        out.records.reserve((end - start) as usize);
    }
    for _ in start..end {
        let r = run_pulse(apparatus, &mut rng);
        out.record(&r, cfg.keep_records);
    }
    out
}

/// Runs `cfg.num_pulses` pulses on `workers` threads (0 = all cores).
pub fn run_experiment(cfg: &ExperimentConfig, workers: usize) -> Result<ExperimentRun> {
    let apparatus = cfg.apparatus()?;
    let shards = cfg.num_pulses.div_ceil(SHARD_PULSES);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    let parts: Vec<ExperimentRun> = pool.install(|| {
        (0..shards)
            .into_par_iter()
            .map(|s| run_shard(&apparatus, cfg, s))
            .collect()
    });
    let mut run = ExperimentRun::empty(cfg);
    for part in parts {
        run.merge(part);
    }
    Ok(run)
}
