use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::assess::{DeviceAssessment, DeviceStatus};
use crate::stats::percentile_sorted;

/// Per-model fleet summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model_id: String,
    /// Assessments for the model, including insufficient-data ones.
    pub devices: usize,
    pub degraded: usize,
    /// Degraded devices over assessable devices (ok + degraded + severe).
    pub degraded_fraction: f64,
    pub severe: usize,
    pub insufficient: usize,
    /// Loss quartiles over the degraded devices; all zero when none.
    pub loss_min: f64,
    pub loss_q1: f64,
    pub loss_median: f64,
    pub loss_q3: f64,
    pub loss_max: f64,
}

/// Summarize assessments per model: counts, degraded fraction, and loss
/// quartiles of the degraded devices. Models come out in id order.
pub fn fleet_report(assessments: &[DeviceAssessment]) -> Vec<ModelSummary> {
    let mut by_model: BTreeMap<&str, Vec<&DeviceAssessment>> = BTreeMap::new();
    for a in assessments {
        by_model.entry(a.model_id.as_str()).or_default().push(a);
    }

    by_model
        .into_iter()
        .map(|(model_id, list)| {
            let mut losses: Vec<f64> = list
                .iter()
                .filter(|a| a.status == DeviceStatus::Degraded)
                .filter_map(|a| a.loss_fraction)
                .collect();
            losses.sort_by(f64::total_cmp);
            let severe = list.iter().filter(|a| a.status == DeviceStatus::Severe).count();
            let insufficient = list
                .iter()
                .filter(|a| a.status == DeviceStatus::InsufficientData)
                .count();
            let assessable = list.len() - insufficient;
            let q = |p: f64| if losses.is_empty() { 0.0 } else { percentile_sorted(&losses, p) };
            ModelSummary {
                model_id: model_id.to_string(),
                devices: list.len(),
                degraded: losses.len(),
                degraded_fraction: if assessable == 0 {
                    0.0
                } else {
                    losses.len() as f64 / assessable as f64
                },
                severe,
                insufficient,
                loss_min: q(0.0),
                loss_q1: q(0.25),
                loss_median: q(0.5),
                loss_q3: q(0.75),
                loss_max: q(1.0),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::CRate;

    fn assessment(model: &str, device: &str, status: DeviceStatus, loss: f64) -> DeviceAssessment {
        DeviceAssessment {
            device_id: device.into(),
            model_id: model.into(),
            status,
            ucc: Some(80),
            u_rate: CRate::new(0.5).ok(),
            capacity_fraction: Some(1.0 - loss),
            loss_fraction: Some(loss),
        }
    }

    #[test]
    fn zero_degraded_fleet_reports_zeros() {
        let list: Vec<DeviceAssessment> =
            (0..5).map(|i| assessment("m", &format!("d{i}"), DeviceStatus::Ok, 0.0)).collect();
        let report = fleet_report(&list);
        assert_eq!(report.len(), 1);
        let m = &report[0];
        assert_eq!(m.degraded, 0);
        assert_eq!(m.degraded_fraction, 0.0);
        for v in [m.loss_min, m.loss_q1, m.loss_median, m.loss_q3, m.loss_max] {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn quartiles_cover_degraded_devices_only() {
        let mut list = vec![
            assessment("m", "d0", DeviceStatus::Ok, 0.0),
            assessment("m", "d1", DeviceStatus::Ok, 0.0),
        ];
        for (i, loss) in [0.1, 0.2, 0.3, 0.4].iter().enumerate() {
            list.push(assessment("m", &format!("g{i}"), DeviceStatus::Degraded, *loss));
        }
        let report = fleet_report(&list);
        let m = &report[0];
        assert_eq!(m.devices, 6);
        assert_eq!(m.degraded, 4);
        assert!((m.degraded_fraction - 4.0 / 6.0).abs() < 1e-12);
        assert_eq!(m.loss_min, 0.1);
        assert_eq!(m.loss_max, 0.4);
        assert!((m.loss_median - 0.25).abs() < 1e-12);
    }

    #[test]
    fn insufficient_devices_are_excluded_from_fraction() {
        let list = vec![
            assessment("m", "d0", DeviceStatus::Degraded, 0.2),
            assessment("m", "d1", DeviceStatus::Ok, 0.0),
            DeviceAssessment {
                device_id: "d2".into(),
                model_id: "m".into(),
                status: DeviceStatus::InsufficientData,
                ucc: None,
                u_rate: None,
                capacity_fraction: None,
                loss_fraction: None,
            },
        ];
        let m = &fleet_report(&list)[0];
        assert_eq!(m.devices, 3);
        assert_eq!(m.insufficient, 1);
        assert!((m.degraded_fraction - 0.5).abs() < 1e-12);
    }

    #[test]
    fn models_come_out_sorted() {
        let list = vec![
            assessment("zeta", "d0", DeviceStatus::Ok, 0.0),
            assessment("alpha", "d1", DeviceStatus::Ok, 0.0),
        ];
        let report = fleet_report(&list);
        assert_eq!(report[0].model_id, "alpha");
        assert_eq!(report[1].model_id, "zeta");
    }
}
