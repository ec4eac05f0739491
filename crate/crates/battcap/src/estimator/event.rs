use std::collections::BTreeMap;

use super::ops::{cumulative_rate_curve, detect_cc_end, select_c_rate, CcDetection};
use super::{EstimatorError, FccEstimate, RateStrategy};
use crate::sim::ChargingSample;
use crate::stats::{TimeCurve, VoltageCurve};
use crate::{CRate, MAX_SECONDS_PER_PERCENT};

/// Per-SOC curves rebuilt from one uninterrupted charging event.
struct EventCurves {
    voltage: VoltageCurve,
    time: TimeCurve,
    first_soc: u8,
    last_soc: u8,
}

/// Collapse an event's samples to per-SOC curves. Duplicates at one SOC keep
/// the earliest timestamp for the time curve and the maximum voltage for the
/// voltage curve; multi-percent jumps spread their elapsed time evenly.
fn build_event_curves(samples: &[ChargingSample]) -> Result<EventCurves, EstimatorError> {
    let mut collapsed: BTreeMap<u8, (i64, i32)> = BTreeMap::new();
    let mut prev: Option<&ChargingSample> = None;
    for s in samples {
        if let Some(p) = prev {
            if s.t < p.t {
                return Err(EstimatorError::InvalidInterval(
                    "samples must be sorted by time".into(),
                ));
            }
            if s.soc < p.soc {
                return Err(EstimatorError::InvalidInterval(
                    "soc decreases mid-event".into(),
                ));
            }
        }
        prev = Some(s);
        if s.soc == 0 {
            continue; // index range starts at 1
        }
        collapsed
            .entry(s.soc)
            .and_modify(|(t, v)| {
                *t = (*t).min(s.t);
                *v = (*v).max(s.voltage_mv);
            })
            .or_insert((s.t, s.voltage_mv));
    }
    if collapsed.len() < 2 {
        return Err(EstimatorError::InsufficientData(format!(
            "event has {} distinct soc levels, need at least 2",
            collapsed.len()
        )));
    }

    let mut voltage = VoltageCurve::new();
    let mut time = TimeCurve::new();
    for (&soc, &(_, v)) in &collapsed {
        voltage
            .set_mv(soc, v as f64)
            .map_err(|e| EstimatorError::InvalidValue(e.to_string()))?;
    }
    let points: Vec<(u8, i64)> = collapsed.iter().map(|(&s, &(t, _))| (s, t)).collect();
    for w in points.windows(2) {
        let (s0, t0) = w[0];
        let (s1, t1) = w[1];
        let span = (s1 - s0) as f64;
        let per = (t1 - t0) as f64 / span;
        if per <= 0.0 || per > MAX_SECONDS_PER_PERCENT {
            return Err(EstimatorError::InvalidInterval(format!(
                "{per:.0} s per percent between soc {s0} and {s1}: not one uninterrupted event"
            )));
        }
        for soc in s0 + 1..=s1 {
            time.set_seconds(soc, per)
                .map_err(|e| EstimatorError::InvalidValue(e.to_string()))?;
        }
    }

    let first_soc = *collapsed.keys().next().expect("nonempty");
    let last_soc = *collapsed.keys().last().expect("nonempty");
    Ok(EventCurves { voltage, time, first_soc, last_soc })
}

/// Estimate present capacity from one uninterrupted charging event.
///
/// Rebuilds per-SOC voltage and time curves, locates the CC end on the
/// voltage curve, computes the cumulative rate curve from the first observed
/// SOC, and applies the rate-ratio estimate. Rate intervals past the CC end
/// are rejected; when the voltage never comes within `tol_mv` of `v_max_mv`
/// the whole event is constant-current and is used in full.
pub fn estimate_from_samples(
    samples: &[ChargingSample],
    fcc_new_mah: f64,
    c_new: CRate,
    v_max_mv: f64,
    tol_mv: f64,
    strategy: RateStrategy,
) -> Result<FccEstimate, EstimatorError> {
    if fcc_new_mah <= 0.0 || !fcc_new_mah.is_finite() {
        return Err(EstimatorError::InvalidValue(format!(
            "fcc_new_mah {fcc_new_mah} must be > 0"
        )));
    }
    if samples.len() < 2 {
        return Err(EstimatorError::InsufficientData(format!(
            "{} samples, need at least 2",
            samples.len()
        )));
    }
    let curves = build_event_curves(samples)?;

    let detection = match detect_cc_end(&curves.voltage, v_max_mv, tol_mv) {
        Ok(d) => d,
        // All samples below SOC 10: nothing in the detectable range.
        Err(EstimatorError::EmptyCurve) => {
            return Err(EstimatorError::InsufficientData(
                "no samples at or above soc 10".into(),
            ))
        }
        Err(e) => return Err(e),
    };
    let cc_end = match detection {
        CcDetection::At(cc) => {
            if cc <= curves.first_soc + 1 {
                // Voltage is already at the maximum where the data starts:
                // the CC phase is not observable.
                return Err(EstimatorError::NoCcPhase);
            }
            cc.min(curves.last_soc)
        }
        CcDetection::NotReached => curves.last_soc,
    };
    if cc_end < curves.first_soc + 2 {
        return Err(EstimatorError::InsufficientData(format!(
            "only {} soc transitions below the cc end",
            cc_end.saturating_sub(curves.first_soc)
        )));
    }

    let rates = cumulative_rate_curve(&curves.time, curves.first_soc)?;
    // Clamp the selection window to the CC end.
    let mut capped = rates;
    for soc in cc_end + 1..=100 {
        capped.series.clear(soc);
    }
    let c_now = select_c_rate(&capped, cc_end, strategy)?;
    let fcc_now_mah = super::ops::estimate_fcc(fcc_new_mah, c_new, c_now);
    Ok(FccEstimate {
        fcc_now_mah,
        c_new,
        c_now,
        loss_fraction: 1.0 - fcc_now_mah / fcc_new_mah,
        cc_end_soc: cc_end,
        strategy,
    })
}
