use serde::{Deserialize, Serialize};

use super::preprocess::ChargingEvent;
use super::CrowdError;
use crate::estimator::{cumulative_rate_curve, detect_cc_end, CRate, CcDetection};
use crate::stats::{
    outlier_clean_time, outlier_clean_voltage, percentile_sorted, skew_direction, SkewDirection,
    TimeCurve, VoltageCurve, SOC_HI, SOC_LO,
};

/// Version written into persisted reference documents.
pub const REFERENCE_FORMAT_VERSION: u32 = 1;

/// Curve analysis window starts here; the initial sharp voltage rise is
/// excluded.
const ANALYSIS_LO: u8 = 10;

/// Thresholds for reference construction.
#[derive(Debug, Clone)]
pub struct ReferenceConfig {
    /// Minimum retained samples per model.
    pub min_model_samples: usize,
    /// Minimum fraction of populated SOC entries before interpolation.
    pub coverage_floor: f64,
    /// Significance of the skewness test choosing median vs 75th percentile.
    pub skew_alpha: f64,
    /// Significance of the Grubbs outlier tests.
    pub grubbs_alpha: f64,
    /// CC-end detection tolerance below the maximum voltage, mV.
    pub tol_mv: f64,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self {
            min_model_samples: 250,
            coverage_floor: 0.6,
            skew_alpha: 0.05,
            grubbs_alpha: 0.05,
            tol_mv: crate::estimator::DEFAULT_CC_TOL_MV,
        }
    }
}

/// Per-model reference behavior derived from the crowd.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceModel {
    pub format_version: u32,
    pub model_id: String,
    /// Aggregated voltage curve, interpolated and outlier-cleaned over
    /// `[10, mcc]`.
    pub voltage_curve: VoltageCurve,
    /// CC-end SOC of the reference curve.
    pub mcc: u8,
    /// Seconds-per-percent curve over the CC window.
    pub time_curve: TimeCurve,
    /// Reference cumulative C-rate at `mcc` — the crowd's stand-in for the
    /// new-battery rate.
    pub m_rate: CRate,
    /// Retained samples the reference was built from.
    pub sample_count: usize,
    /// Fraction of SOC entries populated before interpolation.
    pub coverage_fraction: f64,
}

impl ReferenceModel {
    /// Maximum charging voltage of this model, inferred from the curve.
    pub fn v_max_mv(&self) -> f64 {
        let top = self
            .voltage_curve
            .series
            .known_in(SOC_LO, SOC_HI)
            .into_iter()
            .map(|(_, v)| v)
            .fold(f64::NEG_INFINITY, f64::max);
        infer_v_max_mv(top)
    }
}

/// Devices charge to 4.2 V or 4.35 V; pick whichever the observed maximum
/// voltage is nearer.
pub fn infer_v_max_mv(observed_max_mv: f64) -> f64 {
    if (observed_max_mv - 4200.0).abs() <= (observed_max_mv - 4350.0).abs() {
        4200.0
    } else {
        4350.0
    }
}

/// Aggregate one SOC's sample distribution: the median when the distribution
/// is significantly left-skewed (biased toward degraded devices), otherwise
/// the 75th percentile (countering device-usage bias).
fn aggregate(values: &mut [f64], skew_alpha: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    match skew_direction(values, skew_alpha) {
        SkewDirection::Left => percentile_sorted(values, 0.5),
        SkewDirection::NotLeft => percentile_sorted(values, 0.75),
    }
}

/// Build a model's reference curves and rate from all of its events.
pub fn build_reference(
    model_id: &str,
    events: &[&ChargingEvent],
    cfg: &ReferenceConfig,
) -> Result<ReferenceModel, CrowdError> {
    let sample_count: usize = events.iter().map(|e| e.samples.len()).sum();
    if sample_count < cfg.min_model_samples {
        return Err(CrowdError::InsufficientSamples {
            got: sample_count,
            need: cfg.min_model_samples,
        });
    }

    // Per-SOC distributions: voltages at each level, and seconds for exact
    // one-percent transitions.
    let mut volt_dist: Vec<Vec<f64>> = vec![Vec::new(); SOC_HI as usize + 1];
    let mut time_dist: Vec<Vec<f64>> = vec![Vec::new(); SOC_HI as usize + 1];
    let mut raw_voltages: Vec<f64> = Vec::with_capacity(sample_count);
    for event in events {
        for pair in event.samples.windows(2) {
            let (prev, cur) = (&pair[0], &pair[1]);
            if cur.soc == prev.soc + 1 {
                if let Some(dt) = cur.delta_t_s {
                    if dt > 0 {
                        time_dist[cur.soc as usize].push(dt as f64);
                    }
                }
            }
        }
        for s in &event.samples {
            if s.soc >= SOC_LO {
                volt_dist[s.soc as usize].push(s.voltage_mv as f64);
            }
            raw_voltages.push(s.voltage_mv as f64);
        }
    }

    let populated = (SOC_LO..=SOC_HI).filter(|&soc| !volt_dist[soc as usize].is_empty()).count();
    let coverage_fraction = populated as f64 / SOC_HI as f64;
    if coverage_fraction < cfg.coverage_floor {
        return Err(CrowdError::TooSparse {
            coverage: coverage_fraction * 100.0,
            need: cfg.coverage_floor * 100.0,
        });
    }

    let mut voltage = VoltageCurve::new();
    for soc in SOC_LO..=SOC_HI {
        if !volt_dist[soc as usize].is_empty() {
            let v = aggregate(&mut volt_dist[soc as usize], cfg.skew_alpha);
            voltage.set_mv(soc, v)?;
        }
    }
    voltage.series.interpolate_in(SOC_LO, SOC_HI)?;

    raw_voltages.sort_by(f64::total_cmp);
    let v_max = infer_v_max_mv(percentile_sorted(&raw_voltages, 0.99));

    let first_mcc = match detect_cc_end(&voltage, v_max, cfg.tol_mv)? {
        CcDetection::At(soc) => soc,
        CcDetection::NotReached => return Err(CrowdError::NoCcPhase),
    };
    if first_mcc <= ANALYSIS_LO + 1 {
        return Err(CrowdError::CcTooShort { mcc: first_mcc });
    }
    let voltage = outlier_clean_voltage(&voltage, ANALYSIS_LO, first_mcc, cfg.grubbs_alpha)?;
    let mcc = match detect_cc_end(&voltage, v_max, cfg.tol_mv)? {
        CcDetection::At(soc) => soc,
        CcDetection::NotReached => return Err(CrowdError::NoCcPhase),
    };
    if mcc <= ANALYSIS_LO + 1 {
        return Err(CrowdError::CcTooShort { mcc });
    }

    let mut time = TimeCurve::new();
    for soc in SOC_LO..=mcc {
        if !time_dist[soc as usize].is_empty() {
            let t = aggregate(&mut time_dist[soc as usize], cfg.skew_alpha)
                .min(crate::MAX_SECONDS_PER_PERCENT);
            time.set_seconds(soc, t)?;
        }
    }
    let time = outlier_clean_time(&time, ANALYSIS_LO, mcc, cfg.grubbs_alpha)?;

    let rates = cumulative_rate_curve(&time, ANALYSIS_LO)?;
    let m_rate = rates.at(mcc).ok_or(CrowdError::CcTooShort { mcc })?;

    Ok(ReferenceModel {
        format_version: REFERENCE_FORMAT_VERSION,
        model_id: model_id.to_string(),
        voltage_curve: voltage,
        mcc,
        time_curve: time,
        m_rate,
        sample_count,
        coverage_fraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crowd::preprocess::{preprocess, PreprocessConfig};
    use crate::sim::{generate_fleet, FleetConfig};

    fn fleet_events(cfg: &FleetConfig) -> (Vec<crate::sim::ChargingSample>, super::super::Preprocessed) {
        let (samples, _) = generate_fleet(cfg).unwrap();
        let pre = preprocess(&samples, &PreprocessConfig::default());
        (samples, pre)
    }

    #[test]
    fn insufficient_samples_rejected() {
        let cfg = FleetConfig {
            devices: 1,
            events_per_device: 1,
            degraded_fraction: 0.0,
            start_soc_min: 60,
            start_soc_max: 60,
            ..FleetConfig::default()
        };
        let (_, pre) = fleet_events(&cfg);
        let by_model = pre.events_by_model();
        let events = &by_model["GT-I9300"];
        let total: usize = events.iter().map(|e| e.samples.len()).sum();
        assert!(total < 250, "one partial event has {total} samples");
        let err = build_reference("GT-I9300", events, &ReferenceConfig::default()).unwrap_err();
        assert!(matches!(err, CrowdError::InsufficientSamples { .. }));
        assert_eq!(err.reason_code(), "insufficient_samples");
    }

    #[test]
    fn all_new_fleet_recovers_rate_closely() {
        let cfg = FleetConfig {
            devices: 30,
            degraded_fraction: 0.0,
            events_per_device: 2,
            jitter_s: 2.0,
            ..FleetConfig::default()
        };
        let (_, pre) = fleet_events(&cfg);
        let by_model = pre.events_by_model();
        let reference =
            build_reference("GT-I9300", &by_model["GT-I9300"], &ReferenceConfig::default())
                .unwrap();
        let true_rate = 925.0 / 2100.0;
        assert!(
            (reference.m_rate.value() - true_rate).abs() <= 0.02,
            "m_rate {} vs {true_rate}",
            reference.m_rate
        );
        assert!(reference.mcc >= 80 && reference.mcc <= 90, "mcc {}", reference.mcc);
        assert!((reference.v_max_mv() - 4200.0).abs() < 1.0);
    }

    #[test]
    fn mixed_fleet_rate_within_half_decitolerance() {
        let cfg = FleetConfig { devices: 60, degraded_fraction: 0.3, ..FleetConfig::default() };
        let (_, pre) = fleet_events(&cfg);
        let by_model = pre.events_by_model();
        let reference =
            build_reference("GT-I9300", &by_model["GT-I9300"], &ReferenceConfig::default())
                .unwrap();
        assert!(
            (reference.m_rate.value() - 0.4405).abs() <= 0.05,
            "m_rate {}",
            reference.m_rate
        );
    }

    #[test]
    fn curves_are_null_free_over_analysis_window() {
        let cfg = FleetConfig { devices: 25, ..FleetConfig::default() };
        let (_, pre) = fleet_events(&cfg);
        let by_model = pre.events_by_model();
        let r = build_reference("GT-I9300", &by_model["GT-I9300"], &ReferenceConfig::default())
            .unwrap();
        assert!(r.voltage_curve.series.complete_in(10, r.mcc));
        assert!(r.time_curve.series.complete_in(10, r.mcc));
        assert!(r.coverage_fraction >= 0.6);
    }

    #[test]
    fn m_rate_is_consistent_with_rate_curve() {
        let cfg = FleetConfig { devices: 25, ..FleetConfig::default() };
        let (_, pre) = fleet_events(&cfg);
        let by_model = pre.events_by_model();
        let r = build_reference("GT-I9300", &by_model["GT-I9300"], &ReferenceConfig::default())
            .unwrap();
        let rates = cumulative_rate_curve(&r.time_curve, 10).unwrap();
        assert_eq!(rates.at(r.mcc).unwrap().value(), r.m_rate.value());
    }

    #[test]
    fn reference_roundtrips_through_json() {
        let cfg = FleetConfig { devices: 25, ..FleetConfig::default() };
        let (_, pre) = fleet_events(&cfg);
        let by_model = pre.events_by_model();
        let r = build_reference("GT-I9300", &by_model["GT-I9300"], &ReferenceConfig::default())
            .unwrap();
        let json = serde_json::to_string_pretty(&r).unwrap();
        let back: ReferenceModel = serde_json::from_str(&json).unwrap();
        assert_eq!(r, back);
    }

    #[test]
    fn v_max_inference_splits_at_midpoint() {
        assert_eq!(infer_v_max_mv(4150.0), 4200.0);
        assert_eq!(infer_v_max_mv(4260.0), 4200.0);
        assert_eq!(infer_v_max_mv(4290.0), 4350.0);
        assert_eq!(infer_v_max_mv(4349.0), 4350.0);
    }
}
