//! Statistical primitives for per-SOC curve processing: interpolation of
//! sparse curves, a skewness-direction test for choosing aggregation
//! percentiles, and iterative Grubbs outlier rejection.

mod clean;
mod curve;
mod grubbs;
mod skew;

pub use clean::{outlier_clean_time, outlier_clean_voltage};
pub use curve::{SocSeries, TimeCurve, VoltageCurve, SOC_HI, SOC_LO};
pub use grubbs::{grubbs_critical_value, grubbs_iterative, grubbs_statistic, GRUBBS_MIN_SAMPLES};
pub use skew::{skew_direction, SkewDirection, SKEW_MIN_SAMPLES};

use thiserror::Error;

/// Statistics-layer failures.
#[derive(Debug, Error)]
pub enum StatsError {
    /// Fewer than two known entries inside the requested range.
    #[error("too sparse: {known} known entries in [{lo}, {hi}]")]
    TooSparse { known: usize, lo: u8, hi: u8 },
    /// A curve value violates its domain bounds.
    #[error("{what} value {value} out of range")]
    OutOfRange { what: &'static str, value: f64 },
    /// A SOC index outside 1..=100.
    #[error("soc index {0} out of range")]
    BadIndex(u8),
}

/// Percentile of an ascending-sorted slice with linear interpolation between
/// order statistics (the common "R-7" definition). `p` in [0, 1].
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty slice");
    if sorted.len() == 1 {
        return sorted[0];
    }
    let rank = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    if lo + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    let frac = rank - lo as f64;
    sorted[lo] + (sorted[lo + 1] - sorted[lo]) * frac
}

/// Median of an unsorted slice.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    percentile_sorted(&v, 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile_sorted(&v, 0.0), 1.0);
        assert_eq!(percentile_sorted(&v, 1.0), 4.0);
        assert_eq!(percentile_sorted(&v, 0.5), 2.5);
        assert!((percentile_sorted(&v, 0.75) - 3.25).abs() < 1e-12);
    }

    #[test]
    fn median_odd_even() {
        assert_eq!(median(&[5.0, 1.0, 3.0]), 3.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
