use super::curve::{TimeCurve, VoltageCurve};
use super::grubbs::grubbs_iterative;
use super::StatsError;

/// Repair passes are capped; each pass nullifies flagged entries and
/// re-interpolates, which can expose neighbors on the next pass.
const MAX_CLEAN_PASSES: usize = 8;

/// Remove voltage outliers over `[lo, hi]` and re-interpolate.
///
/// Works on the consecutive-difference sequence `|v(k) - v(k-1)|`: the
/// iterative Grubbs test flags extreme jumps, and the entry terminating each
/// flagged difference is nullified and re-estimated by linear interpolation.
/// Repeats until no difference is flagged. The input must be fully
/// interpolated over the range; entries the test never flags are unchanged.
pub fn outlier_clean_voltage(
    curve: &VoltageCurve,
    lo: u8,
    hi: u8,
    alpha: f64,
) -> Result<VoltageCurve, StatsError> {
    let mut cleaned = curve.clone();
    if hi <= lo {
        return Ok(cleaned);
    }
    if !cleaned.series.complete_in(lo, hi) {
        return Err(StatsError::TooSparse {
            known: cleaned.series.known_count_in(lo, hi),
            lo,
            hi,
        });
    }
    for _ in 0..MAX_CLEAN_PASSES {
        let diffs: Vec<f64> = (lo + 1..=hi)
            .map(|soc| {
                (cleaned.series.get(soc).expect("complete")
                    - cleaned.series.get(soc - 1).expect("complete"))
                .abs()
            })
            .collect();
        let flagged = grubbs_iterative(&diffs, alpha);
        if flagged.is_empty() {
            break;
        }
        for diff_idx in &flagged {
            // diffs[i] spans soc (lo + i) -> (lo + i + 1); nullify the
            // terminating entry.
            cleaned.series.clear(lo + *diff_idx as u8 + 1);
        }
        cleaned.series.interpolate_in(lo, hi)?;
    }
    Ok(cleaned)
}

/// Remove charging-time outliers over `[lo, hi]` and interpolate.
///
/// Per-percent times are roughly constant within the CC window, so the
/// Grubbs test runs directly on the known values; flagged entries are
/// nullified and the range is interpolated (the input may be sparse).
pub fn outlier_clean_time(
    curve: &TimeCurve,
    lo: u8,
    hi: u8,
    alpha: f64,
) -> Result<TimeCurve, StatsError> {
    let mut cleaned = curve.clone();
    if hi <= lo {
        return Ok(cleaned);
    }
    let known = cleaned.series.known_in(lo, hi);
    let values: Vec<f64> = known.iter().map(|&(_, v)| v).collect();
    for idx in grubbs_iterative(&values, alpha) {
        cleaned.series.clear(known[idx].0);
    }
    cleaned.series.interpolate_in(lo, hi)?;
    Ok(cleaned)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_curve(lo: u8, hi: u8, base: f64, slope: f64) -> VoltageCurve {
        let mut c = VoltageCurve::new();
        for soc in lo..=hi {
            c.set_mv(soc, base + slope * soc as f64).unwrap();
        }
        c
    }

    #[test]
    fn smooth_curve_is_unchanged() {
        let c = linear_curve(10, 85, 3537.5, 6.25);
        let cleaned = outlier_clean_voltage(&c, 10, 85, 0.05).unwrap();
        assert_eq!(c, cleaned);
    }

    #[test]
    fn displaced_entry_is_repaired() {
        let mut c = linear_curve(10, 85, 3537.5, 6.25);
        let original = c.series.get(40).unwrap();
        c.set_mv(40, original + 200.0).unwrap();
        let cleaned = outlier_clean_voltage(&c, 10, 85, 0.05).unwrap();
        let repaired = cleaned.series.get(40).unwrap();
        assert!((repaired - original).abs() < 10.0, "repaired {repaired} vs {original}");
    }

    #[test]
    fn two_adjacent_displaced_entries_are_repaired() {
        let mut c = linear_curve(10, 85, 3537.5, 6.25);
        let orig_40 = c.series.get(40).unwrap();
        let orig_41 = c.series.get(41).unwrap();
        c.set_mv(40, orig_40 + 200.0).unwrap();
        c.set_mv(41, orig_41 + 200.0).unwrap();
        let cleaned = outlier_clean_voltage(&c, 10, 85, 0.05).unwrap();
        assert!((cleaned.series.get(40).unwrap() - orig_40).abs() < 10.0);
        assert!((cleaned.series.get(41).unwrap() - orig_41).abs() < 10.0);
    }

    #[test]
    fn unflagged_entries_are_never_changed() {
        let mut c = linear_curve(10, 85, 3537.5, 6.25);
        c.set_mv(60, c.series.get(60).unwrap() + 150.0).unwrap();
        let cleaned = outlier_clean_voltage(&c, 10, 85, 0.05).unwrap();
        for soc in 10..=55 {
            assert_eq!(c.series.get(soc), cleaned.series.get(soc), "soc {soc}");
        }
        for soc in 65..=85 {
            assert_eq!(c.series.get(soc), cleaned.series.get(soc), "soc {soc}");
        }
    }

    #[test]
    fn incomplete_range_is_too_sparse() {
        let mut c = linear_curve(10, 85, 3537.5, 6.25);
        c.series.clear(50);
        assert!(matches!(
            outlier_clean_voltage(&c, 10, 85, 0.05),
            Err(StatsError::TooSparse { .. })
        ));
    }

    #[test]
    fn time_spike_is_repaired() {
        let mut t = TimeCurve::new();
        for soc in 11..=85 {
            t.set_seconds(soc, 81.7).unwrap();
        }
        t.set_seconds(47, 400.0).unwrap();
        let cleaned = outlier_clean_time(&t, 11, 85, 0.05).unwrap();
        assert!((cleaned.series.get(47).unwrap() - 81.7).abs() < 1e-6);
    }

    #[test]
    fn sparse_time_curve_is_interpolated_after_cleaning() {
        let mut t = TimeCurve::new();
        for soc in (11..=85).step_by(2) {
            t.set_seconds(soc, 60.0).unwrap();
        }
        let cleaned = outlier_clean_time(&t, 11, 85, 0.05).unwrap();
        assert!(cleaned.series.complete_in(11, 85));
    }
}
