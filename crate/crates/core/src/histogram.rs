use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniformly binned histogram; bin `i` covers `[low + i·width, low + (i+1)·width)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub low: f64,
    pub width: f64,
    pub counts: Vec<f64>,
}

impl Histogram {
    pub fn new(low: f64, width: f64, counts: Vec<f64>) -> Result<Self> {
        if !(width > 0.0) || !width.is_finite() {
            return Err(Error::InvalidParameter {
                name: "width",
                value: width,
                reason: "bin width must be finite and > 0",
            });
        }
        if let Some(&c) = counts.iter().find(|c| !(**c >= 0.0) || !c.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "count",
                value: c,
                reason: "bin counts must be finite and >= 0",
            });
        }
        Ok(Self { low, width, counts })
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.total() <= 0.0
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    pub fn bin_low(&self, i: usize) -> f64 {
        self.low + i as f64 * self.width
    }

    pub fn bin_high(&self, i: usize) -> f64 {
        self.low + (i + 1) as f64 * self.width
    }

    pub fn bin_center(&self, i: usize) -> f64 {
        self.low + (i as f64 + 0.5) * self.width
    }

    /// Sum of counts in bins whose centers fall in `[lo, hi)`.
    pub fn mass_between(&self, lo: f64, hi: f64) -> f64 {
        (0..self.len())
            .filter(|&i| {
                let c = self.bin_center(i);
                c >= lo && c < hi
            })
            .map(|i| self.counts[i])
            .sum()
    }
}

/// Integer bin counts on a fixed grid centered on multiples of `width`:
/// bin `i` covers `[(i - ½)·width, (i + ½)·width)`. Grows in both directions,
/// so shards can be merged exactly regardless of the range they saw.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedCounts {
    width: f64,
    first: i64,
    counts: Vec<u64>,
}

impl BinnedCounts {
    pub fn new(width: f64) -> Self {
        assert!(width > 0.0, "bin width must be positive");
        Self {
            width,
            first: 0,
            counts: Vec::new(),
        }
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn index_of(&self, x: f64) -> i64 {
        (x / self.width + 0.5).floor() as i64
    }

    pub fn add(&mut self, x: f64) {
        self.add_count(self.index_of(x), 1);
    }

    fn add_count(&mut self, idx: i64, n: u64) {
        if self.counts.is_empty() {
            self.first = idx;
            self.counts.push(0);
        }
        if idx < self.first {
            let grow = (self.first - idx) as usize;
            self.counts.splice(0..0, std::iter::repeat_n(0, grow));
            self.first = idx;
        }
        let pos = (idx - self.first) as usize;
        if pos >= self.counts.len() {
            self.counts.resize(pos + 1, 0);
        }
        self.counts[pos] += n;
    }

    pub fn merge(&mut self, other: &BinnedCounts) {
        assert_eq!(self.width, other.width, "cannot merge different bin widths");
        for (i, &c) in other.counts.iter().enumerate() {
            if c > 0 {
                self.add_count(other.first + i as i64, c);
            }
        }
    }

    pub fn to_histogram(&self) -> Histogram {
        Histogram {
            low: (self.first as f64 - 0.5) * self.width,
            width: self.width,
            counts: self.counts.iter().map(|&c| c as f64).collect(),
        }
    }
}
