//! Rate-based full-charge-capacity estimation.
//!
//! A battery's capacity-relative charging rate (C-rate) rises as its capacity
//! falls, because the charging controller keeps pushing the same current into
//! a smaller cell. With the new-battery rate `C_new` known, the present
//! capacity follows from the rate ratio:
//! `FCC_now = FCC_new * C_new / C_now`. The C-rate itself is recovered purely
//! from SOC update timestamps — one percent takes 36 s at 1 C — and the CC
//! phase boundary is read off the voltage curve.

mod event;
mod ops;
mod profile;

pub use event::estimate_from_samples;
pub use ops::{
    c_rate_over_interval, cumulative_rate_curve, detect_cc_end, estimate_fcc, select_c_rate,
    CcDetection, RateCurve, DEFAULT_CC_TOL_MV,
};
pub use profile::{build_capacity_profile, fit_exp_model, ExpCapacityModel, ProfilePoint};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Estimator failures.
#[derive(Debug, Error)]
pub enum EstimatorError {
    /// SOC or time not strictly increasing over a rate interval.
    #[error("invalid interval: {0}")]
    InvalidInterval(String),
    /// A required curve entry is null.
    #[error("missing curve entries: {0}")]
    MissingEntries(String),
    /// No entries in the analyzed curve range.
    #[error("empty curve in analyzed range")]
    EmptyCurve,
    /// Fewer than two SOC transitions inside the usable CC range.
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    /// The samples never show a constant-current phase.
    #[error("no observable CC phase")]
    NoCcPhase,
    /// Nonlinear fit failed to converge.
    #[error("exponential fit diverged after {0} restarts")]
    FitDiverged(usize),
    /// A value violates its domain (e.g. non-positive C-rate).
    #[error("invalid value: {0}")]
    InvalidValue(String),
}

/// A charging rate relative to capacity: 1 C charges the full capacity in
/// one hour. Always positive.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct CRate(f64);

impl CRate {
    pub fn new(value: f64) -> Result<Self, EstimatorError> {
        if value.is_finite() && value > 0.0 {
            Ok(Self(value))
        } else {
            Err(EstimatorError::InvalidValue(format!("c-rate {value} must be > 0")))
        }
    }

    /// Rate implied by a charging current and a capacity.
    pub fn from_current(i_ma: f64, fcc_mah: f64) -> Result<Self, EstimatorError> {
        Self::new(i_ma / fcc_mah)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for CRate {
    type Error = EstimatorError;
    fn try_from(v: f64) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<CRate> for f64 {
    fn from(r: CRate) -> f64 {
        r.0
    }
}

impl std::fmt::Display for CRate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.4} C", self.0)
    }
}

/// Which cumulative rate inside the CC phase feeds the FCC estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateStrategy {
    /// The rate at the CC-end SOC (covers the whole CC phase). The default:
    /// it tracks measurements more closely than the alternative.
    #[default]
    AtCcEnd,
    /// The highest cumulative rate at or below the CC end.
    MaxInCc,
}

impl std::fmt::Display for RateStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RateStrategy::AtCcEnd => write!(f, "at-cc-end"),
            RateStrategy::MaxInCc => write!(f, "max-in-cc"),
        }
    }
}

impl std::str::FromStr for RateStrategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "at-cc-end" => Ok(RateStrategy::AtCcEnd),
            "max-in-cc" => Ok(RateStrategy::MaxInCc),
            other => Err(format!("unknown strategy {other}; use at-cc-end or max-in-cc")),
        }
    }
}

/// Result of a sample-based FCC estimation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FccEstimate {
    /// Estimated present capacity, mAh.
    pub fcc_now_mah: f64,
    /// New-battery rate used as the reference.
    pub c_new: CRate,
    /// Selected present-battery rate.
    pub c_now: CRate,
    /// `1 - fcc_now/fcc_new`; may be slightly negative (a battery above its
    /// label); fleet reporting clamps, this value does not.
    pub loss_fraction: f64,
    /// End of the usable CC range the rate was selected over.
    pub cc_end_soc: u8,
    pub strategy: RateStrategy,
}

impl FccEstimate {
    /// Capacity in integer mAh, rounded half away from zero.
    pub fn fcc_now_rounded_mah(&self) -> i64 {
        self.fcc_now_mah.round() as i64
    }
}
