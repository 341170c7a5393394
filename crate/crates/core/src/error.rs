use thiserror::Error;

use crate::reconstruct::PeakFit;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("probability vector is not normalized (sum = {sum})")]
    NotNormalized { sum: f64 },

    #[error("probability vector has a non-finite entry at n = {index}")]
    NonFinite { index: usize },

    #[error("truncation at N = {truncation} leaves tail mass {mass:e} (limit {limit:e})")]
    TailMass {
        truncation: usize,
        mass: f64,
        limit: f64,
    },

    #[error("truncation N = {truncation} exceeds the cap of {cap}")]
    TruncationTooLarge { truncation: usize, cap: usize },

    #[error("transfer matrix is singular (efficiency must be > 0)")]
    Singular,

    #[error("SCA windows overlap or are unsorted: {0}")]
    WindowOverlap(String),

    #[error("histogram is empty")]
    EmptyHistogram,

    #[error("peak fit did not converge after {iterations} iterations (residual {residual:e})")]
    FitNotConverged {
        iterations: usize,
        residual: f64,
        fit: Box<PeakFit>,
    },

    #[error("peaks {first} and {second} are degenerate: spacing {spacing} < sigma/2 = {half_sigma}")]
    DegeneratePeaks {
        first: usize,
        second: usize,
        spacing: f64,
        half_sigma: f64,
    },

    #[error("total probability of the conditioning event is zero")]
    ZeroTotal,

    #[error("constrained solver did not converge after {iterations} iterations")]
    NotConverged { iterations: usize },

    #[error("zero singles in {arm}")]
    ZeroSingles { arm: &'static str },

    #[error("line {line}: {message}")]
    Schema { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures caused by bad input or configuration, as opposed to
    /// numerical failures of a well-posed computation.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. }
                | Error::NotNormalized { .. }
                | Error::NonFinite { .. }
                | Error::TruncationTooLarge { .. }
                | Error::WindowOverlap(_)
                | Error::EmptyHistogram
                | Error::ZeroSingles { .. }
                | Error::Schema { .. }
                | Error::Io(_)
        )
    }
}
