use serde::{Deserialize, Serialize};

use super::{CRate, EstimatorError, RateStrategy};
use crate::stats::{SocSeries, TimeCurve, VoltageCurve, SOC_HI};
use crate::SECONDS_PER_PERCENT_AT_1C;

/// Default tolerance below the maximum voltage for CC-end detection, from
/// the ±0.05 V spread of per-SOC voltage measurements.
pub const DEFAULT_CC_TOL_MV: f64 = 50.0;

/// Curve analysis skips the first battery levels: the initial sharp voltage
/// rise distorts both detection and rate statistics.
const FIRST_SEGMENT_END: u8 = 10;

/// Cumulative C-rate from a SOC interval and its boundary timestamps:
/// `36 * (soc_j - soc_i) / (t_j - t_i)`.
pub fn c_rate_over_interval(
    soc_i: u8,
    soc_j: u8,
    t_i: i64,
    t_j: i64,
) -> Result<CRate, EstimatorError> {
    if soc_j <= soc_i {
        return Err(EstimatorError::InvalidInterval(format!(
            "soc must increase: {soc_i} -> {soc_j}"
        )));
    }
    if t_j <= t_i {
        return Err(EstimatorError::InvalidInterval(format!(
            "time must increase: {t_i} -> {t_j}"
        )));
    }
    CRate::new(SECONDS_PER_PERCENT_AT_1C * (soc_j - soc_i) as f64 / (t_j - t_i) as f64)
}

/// Per-SOC cumulative C-rate: entry `k` is the rate to charge from
/// `start_soc` up to `k`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RateCurve {
    pub series: SocSeries,
}

impl RateCurve {
    pub fn at(&self, soc: u8) -> Option<CRate> {
        self.series.get(soc).and_then(|v| CRate::new(v).ok())
    }
}

/// Build the cumulative rate curve from a seconds-per-percent time curve.
///
/// Entry `k` (for `k > start_soc` up to the last populated time entry) is
/// `36 * (k - start_soc) / sum(time[start_soc+1..=k])`. Every time entry in
/// that span must be present.
pub fn cumulative_rate_curve(
    time_curve: &TimeCurve,
    start_soc: u8,
) -> Result<RateCurve, EstimatorError> {
    if start_soc >= SOC_HI {
        return Err(EstimatorError::EmptyCurve);
    }
    let Some((last, _)) = time_curve.series.last_known_in(start_soc + 1, SOC_HI) else {
        return Err(EstimatorError::EmptyCurve);
    };
    let mut rates = RateCurve::default();
    let mut elapsed_s = 0.0;
    for k in start_soc + 1..=last {
        let dt = time_curve.series.get(k).ok_or_else(|| {
            EstimatorError::MissingEntries(format!("time curve null at soc {k}"))
        })?;
        elapsed_s += dt;
        rates
            .series
            .set(k, SECONDS_PER_PERCENT_AT_1C * (k - start_soc) as f64 / elapsed_s)
            .map_err(|e| EstimatorError::InvalidValue(e.to_string()))?;
    }
    Ok(rates)
}

/// Outcome of CC-end detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CcDetection {
    /// Smallest SOC at or above 10 whose voltage reaches `v_max - tol`.
    At(u8),
    /// The curve never reaches the threshold in the scanned range.
    NotReached,
}

/// Find the SOC that terminates the CC phase: the smallest SOC >= 10 whose
/// voltage is within `tol_mv` of `v_max_mv`.
pub fn detect_cc_end(
    curve: &VoltageCurve,
    v_max_mv: f64,
    tol_mv: f64,
) -> Result<CcDetection, EstimatorError> {
    let known = curve.series.known_in(FIRST_SEGMENT_END, SOC_HI);
    if known.is_empty() {
        return Err(EstimatorError::EmptyCurve);
    }
    Ok(known
        .iter()
        .find(|&&(_, v)| v >= v_max_mv - tol_mv)
        .map(|&(soc, _)| CcDetection::At(soc))
        .unwrap_or(CcDetection::NotReached))
}

/// Pick the C-rate that feeds the FCC estimate.
pub fn select_c_rate(
    rate_curve: &RateCurve,
    cc_end: u8,
    strategy: RateStrategy,
) -> Result<CRate, EstimatorError> {
    match strategy {
        RateStrategy::AtCcEnd => rate_curve.at(cc_end).ok_or_else(|| {
            EstimatorError::MissingEntries(format!("no cumulative rate at soc {cc_end}"))
        }),
        RateStrategy::MaxInCc => {
            let best = rate_curve
                .series
                .known_in(crate::stats::SOC_LO, cc_end)
                .into_iter()
                .map(|(_, v)| v)
                .fold(f64::NEG_INFINITY, f64::max);
            if best.is_finite() {
                CRate::new(best)
            } else {
                Err(EstimatorError::MissingEntries(format!(
                    "no cumulative rates at or below soc {cc_end}"
                )))
            }
        }
    }
}

/// Present capacity from the rate ratio: `fcc_new * c_new / c_now`.
pub fn estimate_fcc(fcc_new_mah: f64, c_new: CRate, c_now: CRate) -> f64 {
    fcc_new_mah * c_new.value() / c_now.value()
}
