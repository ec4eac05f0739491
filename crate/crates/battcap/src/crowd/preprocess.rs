use std::collections::BTreeMap;

use crate::sim::{BatteryHealth, ChargerKind, ChargingSample};
use crate::EVENT_GAP_LIMIT_S;

/// Filtering thresholds applied before event construction.
#[derive(Debug, Clone)]
pub struct PreprocessConfig {
    /// Accepted battery temperature band, Celsius. Outside it charging
    /// behavior (and hence the curves) is temperature-dominated.
    pub temp_min_c: f64,
    pub temp_max_c: f64,
    /// Inter-sample gap that ends a charging event, seconds.
    pub max_gap_s: i64,
    /// When set, samples with a CPU load above this are dropped too.
    pub max_cpu: Option<f64>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            temp_min_c: 21.0,
            temp_max_c: 40.0,
            max_gap_s: EVENT_GAP_LIMIT_S,
            max_cpu: None,
        }
    }
}

/// One retained sample with the time elapsed since the previous sample of
/// the same event (`None` on the event head).
#[derive(Debug, Clone, PartialEq)]
pub struct EventSample {
    pub t: i64,
    pub soc: u8,
    pub voltage_mv: i32,
    pub cpu: f64,
    pub delta_t_s: Option<u32>,
}

/// A maximal run of one device's samples with nondecreasing SOC and
/// inter-sample gaps within the event limit.
#[derive(Debug, Clone, PartialEq)]
pub struct ChargingEvent {
    pub device_id: String,
    pub model_id: String,
    pub samples: Vec<EventSample>,
}

/// Output of [`preprocess`].
#[derive(Debug, Default)]
pub struct Preprocessed {
    /// Events per device, devices in lexicographic order.
    pub events_by_device: BTreeMap<String, Vec<ChargingEvent>>,
    /// Records that failed the sample invariants.
    pub malformed: usize,
    /// Well-formed records dropped by the charger/health/temperature filters.
    pub filtered: usize,
}

impl Preprocessed {
    /// Total retained samples.
    pub fn sample_count(&self) -> usize {
        self.events_by_device
            .values()
            .flat_map(|events| events.iter())
            .map(|e| e.samples.len())
            .sum()
    }

    /// Events regrouped per model, models in lexicographic order.
    pub fn events_by_model(&self) -> BTreeMap<&str, Vec<&ChargingEvent>> {
        let mut map: BTreeMap<&str, Vec<&ChargingEvent>> = BTreeMap::new();
        for events in self.events_by_device.values() {
            for e in events {
                map.entry(e.model_id.as_str()).or_default().push(e);
            }
        }
        map
    }
}

/// Filter raw telemetry down to usable AC charging data and split it into
/// per-device charging events.
///
/// Keeps only samples with an `ac` charger, `good` health, and a battery
/// temperature inside the configured band. Samples per device are sorted by
/// timestamp; an event ends wherever the gap to the next sample exceeds the
/// limit or the SOC decreases. Malformed records are counted, never fatal.
pub fn preprocess(samples: &[ChargingSample], cfg: &PreprocessConfig) -> Preprocessed {
    let mut out = Preprocessed::default();
    let mut per_device: BTreeMap<&str, Vec<&ChargingSample>> = BTreeMap::new();

    for s in samples {
        if s.validate().is_err() {
            out.malformed += 1;
            continue;
        }
        let keep = s.charger == ChargerKind::Ac
            && s.health == BatteryHealth::Good
            && s.temp_c >= cfg.temp_min_c
            && s.temp_c <= cfg.temp_max_c
            && cfg.max_cpu.is_none_or(|cap| s.cpu <= cap);
        if !keep {
            out.filtered += 1;
            continue;
        }
        per_device.entry(s.device_id.as_str()).or_default().push(s);
    }

    for (device_id, mut dev_samples) in per_device {
        dev_samples.sort_by_key(|s| (s.t, s.soc));
        let mut events: Vec<ChargingEvent> = Vec::new();
        let mut current: Vec<EventSample> = Vec::new();
        let mut prev: Option<&ChargingSample> = None;

        let mut flush = |current: &mut Vec<EventSample>, model_id: &str| {
            if !current.is_empty() {
                events.push(ChargingEvent {
                    device_id: device_id.to_string(),
                    model_id: model_id.to_string(),
                    samples: std::mem::take(current),
                });
            }
        };

        for s in dev_samples {
            let boundary = match prev {
                None => true,
                Some(p) => s.t - p.t > cfg.max_gap_s || s.soc < p.soc,
            };
            if boundary {
                let model = prev.map(|p| p.model_id.as_str()).unwrap_or("");
                flush(&mut current, model);
                current.push(EventSample {
                    t: s.t,
                    soc: s.soc,
                    voltage_mv: s.voltage_mv,
                    cpu: s.cpu,
                    delta_t_s: None,
                });
            } else {
                let p = prev.expect("non-first sample");
                current.push(EventSample {
                    t: s.t,
                    soc: s.soc,
                    voltage_mv: s.voltage_mv,
                    cpu: s.cpu,
                    delta_t_s: Some((s.t - p.t) as u32),
                });
            }
            prev = Some(s);
        }
        let model = prev.map(|p| p.model_id.as_str()).unwrap_or("");
        flush(&mut current, model);
        out.events_by_device.insert(device_id.to_string(), events);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(t: i64, soc: u8) -> ChargingSample {
        ChargingSample {
            t,
            soc,
            voltage_mv: 3800,
            temp_c: 25.0,
            charger: ChargerKind::Ac,
            health: BatteryHealth::Good,
            cpu: 0.0,
            device_id: "dev-a".into(),
            model_id: "GT-I9300".into(),
        }
    }

    #[test]
    fn usb_samples_are_filtered() {
        let mut usb = sample(0, 10);
        usb.charger = ChargerKind::Usb;
        let out = preprocess(&[usb, sample(60, 11)], &PreprocessConfig::default());
        assert_eq!(out.filtered, 1);
        assert_eq!(out.sample_count(), 1);
    }

    #[test]
    fn cold_samples_are_filtered() {
        let mut cold = sample(0, 10);
        cold.temp_c = 15.0;
        let out = preprocess(&[cold, sample(60, 11)], &PreprocessConfig::default());
        assert_eq!(out.filtered, 1);
    }

    #[test]
    fn bad_health_is_filtered() {
        let mut dead = sample(0, 10);
        dead.health = BatteryHealth::Dead;
        let out = preprocess(&[dead], &PreprocessConfig::default());
        assert_eq!(out.filtered, 1);
        assert_eq!(out.sample_count(), 0);
    }

    #[test]
    fn malformed_samples_are_counted_not_fatal() {
        let mut bad = sample(0, 10);
        bad.voltage_mv = 9000;
        let out = preprocess(&[bad, sample(60, 11), sample(120, 12)], &PreprocessConfig::default());
        assert_eq!(out.malformed, 1);
        assert_eq!(out.sample_count(), 2);
    }

    #[test]
    fn long_gap_splits_events() {
        let samples = vec![sample(0, 10), sample(60, 11), sample(660, 12), sample(720, 13)];
        let out = preprocess(&samples, &PreprocessConfig::default());
        let events = &out.events_by_device["dev-a"];
        assert_eq!(events.len(), 2, "600 s gap must split");
        assert_eq!(events[0].samples.len(), 2);
        assert_eq!(events[1].samples[0].delta_t_s, None);
        assert_eq!(events[1].samples[1].delta_t_s, Some(60));
    }

    #[test]
    fn soc_decrease_splits_events() {
        let samples = vec![sample(0, 50), sample(60, 51), sample(120, 30), sample(180, 31)];
        let out = preprocess(&samples, &PreprocessConfig::default());
        assert_eq!(out.events_by_device["dev-a"].len(), 2);
    }

    #[test]
    fn gap_at_exactly_514s_stays_in_one_event() {
        let samples = vec![sample(0, 10), sample(514, 11)];
        let out = preprocess(&samples, &PreprocessConfig::default());
        assert_eq!(out.events_by_device["dev-a"].len(), 1);
    }

    #[test]
    fn unsorted_input_is_sorted_per_device() {
        let samples = vec![sample(120, 12), sample(0, 10), sample(60, 11)];
        let out = preprocess(&samples, &PreprocessConfig::default());
        let events = &out.events_by_device["dev-a"];
        assert_eq!(events.len(), 1);
        let socs: Vec<u8> = events[0].samples.iter().map(|s| s.soc).collect();
        assert_eq!(socs, vec![10, 11, 12]);
    }

    #[test]
    fn cpu_threshold_filter_is_opt_in() {
        let mut busy = sample(0, 10);
        busy.cpu = 0.9;
        let out = preprocess(&[busy.clone()], &PreprocessConfig::default());
        assert_eq!(out.filtered, 0);
        let cfg = PreprocessConfig { max_cpu: Some(0.5), ..PreprocessConfig::default() };
        let out = preprocess(&[busy], &cfg);
        assert_eq!(out.filtered, 1);
    }
}
