use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::preprocess::ChargingEvent;
use super::reference::ReferenceModel;
use crate::estimator::{cumulative_rate_curve, detect_cc_end, CRate, CcDetection};
use crate::stats::{median, outlier_clean_time, TimeCurve, VoltageCurve, SOC_HI, SOC_LO};

/// Curve analysis window starts here, as for reference construction.
const ANALYSIS_LO: u8 = 10;

/// Thresholds for per-device assessment.
#[derive(Debug, Clone)]
pub struct AssessConfig {
    /// Minimum samples inside the CC boundary of the reference.
    pub min_user_samples: usize,
    /// Only samples within this window back from the device's newest sample
    /// are used ("the latest month").
    pub recent_window_s: i64,
    /// CC-end detection tolerance, mV.
    pub tol_mv: f64,
    /// Significance of the Grubbs cleaning of the user time curve.
    pub grubbs_alpha: f64,
}

impl Default for AssessConfig {
    fn default() -> Self {
        Self {
            min_user_samples: 25,
            recent_window_s: 30 * 86_400,
            tol_mv: crate::estimator::DEFAULT_CC_TOL_MV,
            grubbs_alpha: 0.05,
        }
    }
}

/// Assessment verdict for one device.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceStatus {
    /// Charging rate at or below the model reference: no detectable loss.
    Ok,
    /// Charging rate above the reference: quantified capacity loss.
    Degraded,
    /// No observable CC phase — the loss is too severe to quantify.
    Severe,
    /// Too few recent samples inside the CC boundary.
    InsufficientData,
}

impl std::fmt::Display for DeviceStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            DeviceStatus::Ok => "ok",
            DeviceStatus::Degraded => "degraded",
            DeviceStatus::Severe => "severe",
            DeviceStatus::InsufficientData => "insufficient_data",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for DeviceStatus {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ok" => Ok(DeviceStatus::Ok),
            "degraded" => Ok(DeviceStatus::Degraded),
            "severe" => Ok(DeviceStatus::Severe),
            "insufficient_data" => Ok(DeviceStatus::InsufficientData),
            other => Err(format!("unknown device status {other}")),
        }
    }
}

/// Capacity verdict of one device against its model reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceAssessment {
    pub device_id: String,
    pub model_id: String,
    pub status: DeviceStatus,
    /// CC-end SOC of the device's recent voltage curve.
    pub ucc: Option<u8>,
    /// Device cumulative rate at `ucc`.
    pub u_rate: Option<CRate>,
    /// `m_rate / u_rate`, clamped to 1 when the device is not degraded.
    pub capacity_fraction: Option<f64>,
    /// `1 - capacity_fraction`; never negative.
    pub loss_fraction: Option<f64>,
}

impl DeviceAssessment {
    fn bare(device_id: &str, model_id: &str, status: DeviceStatus) -> Self {
        Self {
            device_id: device_id.to_string(),
            model_id: model_id.to_string(),
            status,
            ucc: None,
            u_rate: None,
            capacity_fraction: None,
            loss_fraction: None,
        }
    }
}

/// Judge one device against its model reference.
///
/// Uses only the device's most recent month of samples; takes the maximum
/// voltage per SOC (less device-usage interference, most recent battery
/// state); requires enough samples inside the reference CC boundary; then
/// compares the device rate at its own CC end with the reference rate:
/// `capacity = m_rate / u_rate` when the device charges faster.
pub fn assess_device(
    device_id: &str,
    events: &[&ChargingEvent],
    reference: &ReferenceModel,
    cfg: &AssessConfig,
) -> DeviceAssessment {
    let model_id = reference.model_id.as_str();
    let newest = events.iter().flat_map(|e| e.samples.iter().map(|s| s.t)).max();
    let Some(newest) = newest else {
        return DeviceAssessment::bare(device_id, model_id, DeviceStatus::InsufficientData);
    };
    let cutoff = newest - cfg.recent_window_s;

    // Max voltage per SOC, and one-percent charging times, from the window.
    let mut volt_max: BTreeMap<u8, f64> = BTreeMap::new();
    let mut time_dist: Vec<Vec<f64>> = vec![Vec::new(); SOC_HI as usize + 1];
    let mut in_boundary = 0usize;
    for event in events {
        for pair in event.samples.windows(2) {
            let (prev, cur) = (&pair[0], &pair[1]);
            if cur.t >= cutoff && prev.t >= cutoff && cur.soc == prev.soc + 1 {
                if let Some(dt) = cur.delta_t_s {
                    if dt > 0 {
                        time_dist[cur.soc as usize].push(dt as f64);
                    }
                }
            }
        }
        for s in &event.samples {
            if s.t < cutoff || s.soc < SOC_LO {
                continue;
            }
            if (ANALYSIS_LO..=reference.mcc).contains(&s.soc) {
                in_boundary += 1;
            }
            volt_max
                .entry(s.soc)
                .and_modify(|v| *v = v.max(s.voltage_mv as f64))
                .or_insert(s.voltage_mv as f64);
        }
    }
    if in_boundary < cfg.min_user_samples {
        return DeviceAssessment::bare(device_id, model_id, DeviceStatus::InsufficientData);
    }

    let mut voltage = VoltageCurve::new();
    for (&soc, &v) in &volt_max {
        if voltage.set_mv(soc, v).is_err() {
            continue;
        }
    }
    if voltage.series.interpolate_in(SOC_LO, SOC_HI).is_err() {
        return DeviceAssessment::bare(device_id, model_id, DeviceStatus::InsufficientData);
    }

    let ucc = match detect_cc_end(&voltage, reference.v_max_mv(), cfg.tol_mv) {
        // Already at maximum voltage where the analysis window starts, or
        // never charging: a CC phase length of zero.
        Ok(CcDetection::At(soc)) if soc <= ANALYSIS_LO => {
            let mut a = DeviceAssessment::bare(device_id, model_id, DeviceStatus::Severe);
            a.ucc = Some(soc);
            return a;
        }
        Ok(CcDetection::At(soc)) => soc,
        Ok(CcDetection::NotReached) => {
            return DeviceAssessment::bare(device_id, model_id, DeviceStatus::Severe)
        }
        Err(_) => {
            return DeviceAssessment::bare(device_id, model_id, DeviceStatus::InsufficientData)
        }
    };

    let mut time = TimeCurve::new();
    for soc in SOC_LO..=ucc {
        let dist = &time_dist[soc as usize];
        if !dist.is_empty() {
            let t = median(dist).min(crate::MAX_SECONDS_PER_PERCENT);
            if time.set_seconds(soc, t).is_err() {
                continue;
            }
        }
    }
    let time = match outlier_clean_time(&time, ANALYSIS_LO, ucc, cfg.grubbs_alpha) {
        Ok(t) => t,
        Err(_) => {
            return DeviceAssessment::bare(device_id, model_id, DeviceStatus::InsufficientData)
        }
    };
    let u_rate = match cumulative_rate_curve(&time, ANALYSIS_LO).map(|r| r.at(ucc)) {
        Ok(Some(rate)) => rate,
        _ => return DeviceAssessment::bare(device_id, model_id, DeviceStatus::InsufficientData),
    };

    let delta_r = u_rate.value() - reference.m_rate.value();
    let (status, capacity) = if delta_r > 0.0 {
        (DeviceStatus::Degraded, reference.m_rate.value() / u_rate.value())
    } else {
        (DeviceStatus::Ok, 1.0)
    };
    DeviceAssessment {
        device_id: device_id.to_string(),
        model_id: model_id.to_string(),
        status,
        ucc: Some(ucc),
        u_rate: Some(u_rate),
        capacity_fraction: Some(capacity),
        loss_fraction: Some(1.0 - capacity),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crowd::preprocess::{preprocess, PreprocessConfig};
    use crate::crowd::reference::{build_reference, ReferenceConfig};
    use crate::sim::{generate_fleet, FleetConfig};

    // A realistic reference population: mostly healthy devices plus a
    // degraded minority, light timestamp jitter.
    fn gs3_reference() -> ReferenceModel {
        let cfg = FleetConfig {
            devices: 30,
            degraded_fraction: 0.3,
            jitter_s: 1.0,
            ..FleetConfig::default()
        };
        let (samples, _) = generate_fleet(&cfg).unwrap();
        let pre = preprocess(&samples, &PreprocessConfig::default());
        let by_model = pre.events_by_model();
        build_reference("GT-I9300", &by_model["GT-I9300"], &ReferenceConfig::default()).unwrap()
    }

    fn device_events(loss: f64, seed: u64) -> Vec<ChargingEvent> {
        let cfg = FleetConfig {
            devices: 1,
            degraded_fraction: if loss > 0.0 { 1.0 } else { 0.0 },
            loss_min: loss,
            loss_max: loss,
            events_per_device: 2,
            seed,
            start_soc_min: 5,
            start_soc_max: 20,
            ..FleetConfig::default()
        };
        let (samples, _) = generate_fleet(&cfg).unwrap();
        let pre = preprocess(&samples, &PreprocessConfig::default());
        pre.events_by_device.into_values().next().unwrap()
    }

    #[test]
    fn paper_rate_pair_gives_17pct_loss() {
        // The governing arithmetic: m_rate 0.44 vs u_rate 0.53.
        assert!(((1.0_f64 - 0.44 / 0.53) - 0.1698).abs() < 1e-3);

        // End-to-end: a cell aged so its CC rate is 0.53 C, judged against a
        // crowd-built reference.
        let reference = gs3_reference();
        let cell_loss = 1.0 - (925.0 / 2100.0) / 0.53;
        let events = device_events(cell_loss, 7);
        let refs: Vec<&ChargingEvent> = events.iter().collect();
        let a = assess_device("dev-0000", &refs, &reference, &AssessConfig::default());
        assert_eq!(a.status, DeviceStatus::Degraded);
        let got = a.loss_fraction.unwrap();
        assert!((got - 0.17).abs() < 0.03, "loss {got}");
    }

    #[test]
    fn new_device_is_ok_with_zero_loss() {
        let reference = gs3_reference();
        let events = device_events(0.0, 9);
        let refs: Vec<&ChargingEvent> = events.iter().collect();
        let a = assess_device("dev-0000", &refs, &reference, &AssessConfig::default());
        assert_eq!(a.status, DeviceStatus::Ok);
        assert_eq!(a.loss_fraction, Some(0.0));
        assert_eq!(a.capacity_fraction, Some(1.0));
    }

    #[test]
    fn device_never_reaching_vmax_is_severe() {
        let reference = gs3_reference();
        // Truncate every event at SOC 60: voltage never nears 4200 mV.
        let mut events = device_events(0.0, 11);
        for e in &mut events {
            e.samples.retain(|s| s.soc <= 60);
        }
        let refs: Vec<&ChargingEvent> = events.iter().collect();
        let a = assess_device("dev-0000", &refs, &reference, &AssessConfig::default());
        assert_eq!(a.status, DeviceStatus::Severe);
    }

    #[test]
    fn few_samples_in_boundary_is_insufficient() {
        let reference = gs3_reference();
        let mut events = device_events(0.0, 13);
        for e in &mut events {
            e.samples.retain(|s| s.soc < 20);
        }
        let refs: Vec<&ChargingEvent> = events.iter().collect();
        let a = assess_device("dev-0000", &refs, &reference, &AssessConfig::default());
        assert_eq!(a.status, DeviceStatus::InsufficientData);
    }

    #[test]
    fn old_samples_outside_window_are_ignored() {
        let reference = gs3_reference();
        let fresh = device_events(0.0, 17);
        // Shift a degraded event far into the past; only the fresh (new
        // battery) data should drive the verdict.
        let mut stale = device_events(0.4, 19);
        for e in &mut stale {
            for s in &mut e.samples {
                s.t -= 90 * 86_400;
            }
        }
        let mut all = stale;
        all.extend(fresh);
        let refs: Vec<&ChargingEvent> = all.iter().collect();
        let a = assess_device("dev-0000", &refs, &reference, &AssessConfig::default());
        assert_eq!(a.status, DeviceStatus::Ok, "stale degraded data must not count");
    }

    #[test]
    fn slower_device_never_reports_larger_loss() {
        // Monotonicity via direct curve manipulation: uniformly longer
        // per-percent times => lower u_rate => no larger loss.
        let reference = gs3_reference();
        let build = |per_percent: f64| {
            let mut tc = TimeCurve::new();
            for soc in 11..=85 {
                tc.set_seconds(soc, per_percent).unwrap();
            }
            cumulative_rate_curve(&tc, 10).unwrap().at(85).unwrap()
        };
        let fast = build(70.0);
        let slow = build(90.0);
        assert!(slow.value() < fast.value());
        let loss = |u: CRate| {
            let d = u.value() - reference.m_rate.value();
            if d > 0.0 { 1.0 - reference.m_rate.value() / u.value() } else { 0.0 }
        };
        assert!(loss(slow) <= loss(fast));
    }
}
