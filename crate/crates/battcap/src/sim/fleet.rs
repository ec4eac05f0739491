use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::charge::{simulate_charge_detailed, SimOptions, SimParams};
use super::sample::ChargingSample;
use super::spec::{model_preset, LoadProfile};
use super::SimError;

/// Parameters of a synthetic fleet: many devices of the configured models,
/// some with aged batteries, all charged on their stock AC charger.
#[derive(Debug, Clone)]
pub struct FleetConfig {
    /// Preset model ids, assigned round-robin over devices.
    pub models: Vec<String>,
    pub devices: usize,
    /// Fraction of devices with capacity loss.
    pub degraded_fraction: f64,
    /// Loss range (fraction of new capacity) for degraded devices.
    pub loss_min: f64,
    pub loss_max: f64,
    /// Charging events per device, 12 h apart.
    pub events_per_device: usize,
    /// Timestamp jitter amplitude per emitted sample, seconds. Keep the
    /// smear (2x this) below the per-percent separation a detectable loss
    /// causes (~8 s at 10% loss on a 0.44 C model), or degraded and healthy
    /// per-SOC time distributions blur together.
    pub jitter_s: f64,
    pub dt_s: f64,
    /// Plug-in SOC range; each event draws uniformly from it.
    pub start_soc_min: u8,
    pub start_soc_max: u8,
    /// Battery temperature range, Celsius.
    pub temp_min_c: f64,
    pub temp_max_c: f64,
    /// Idle system draw upper bound, mA (drawn uniformly per device).
    pub load_max_ma: f64,
    /// Epoch seconds of the first device's first event.
    pub t0_epoch_s: i64,
    pub seed: u64,
}

impl Default for FleetConfig {
    fn default() -> Self {
        Self {
            models: vec!["GT-I9300".into()],
            devices: 100,
            degraded_fraction: 0.3,
            loss_min: 0.10,
            loss_max: 0.50,
            events_per_device: 2,
            jitter_s: 2.0,
            dt_s: 1.0,
            start_soc_min: 5,
            start_soc_max: 50,
            temp_min_c: 22.0,
            temp_max_c: 38.0,
            load_max_ma: 5.0,
            t0_epoch_s: 1_700_000_000,
            seed: 42,
        }
    }
}

impl FleetConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.devices == 0 || self.events_per_device == 0 {
            return Err(SimError::InvalidSpec(
                "fleet needs at least one device and one event".into(),
            ));
        }
        if self.models.is_empty() {
            return Err(SimError::InvalidSpec("fleet.models is empty".into()));
        }
        for m in &self.models {
            if model_preset(m).is_none() {
                return Err(SimError::InvalidSpec(format!("unknown model preset {m}")));
            }
        }
        if !(0.0..=1.0).contains(&self.degraded_fraction) {
            return Err(SimError::InvalidSpec(
                "degraded_fraction must be in [0, 1]".into(),
            ));
        }
        if !(0.0 <= self.loss_min && self.loss_min <= self.loss_max && self.loss_max < 0.9) {
            return Err(SimError::InvalidSpec(
                "loss range must satisfy 0 <= min <= max < 0.9".into(),
            ));
        }
        if self.start_soc_min > self.start_soc_max || self.start_soc_max >= 100 {
            return Err(SimError::InvalidSpec("bad start_soc range".into()));
        }
        if self.temp_min_c > self.temp_max_c {
            return Err(SimError::InvalidSpec("bad temperature range".into()));
        }
        if self.load_max_ma < 0.0 {
            return Err(SimError::InvalidSpec("load_max_ma must be >= 0".into()));
        }
        Ok(())
    }
}

/// Ground truth for one generated device, written alongside the samples.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DeviceTruth {
    pub device_id: String,
    pub model_id: String,
    pub fcc_new_mah: f64,
    pub fcc_now_mah: f64,
    pub loss_fraction: f64,
    /// New-battery AC charging C-rate of the device's model.
    pub c_new_ac: f64,
}

/// Generate the fleet's telemetry. Deterministic for a given config.
///
/// The first `round(devices * degraded_fraction)` devices carry a loss drawn
/// uniformly from the loss range; the rest are new.
pub fn generate_fleet(cfg: &FleetConfig) -> Result<(Vec<ChargingSample>, Vec<DeviceTruth>), SimError> {
    cfg.validate()?;
    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let degraded_count = (cfg.devices as f64 * cfg.degraded_fraction).round() as usize;
    let mut samples = Vec::new();
    let mut truths = Vec::with_capacity(cfg.devices);

    for i in 0..cfg.devices {
        let dev_seed: u64 = master.gen();
        let mut rng = ChaCha8Rng::seed_from_u64(dev_seed);
        let preset = model_preset(&cfg.models[i % cfg.models.len()]).expect("validated");
        let loss = if i < degraded_count {
            rng.gen_range(cfg.loss_min..=cfg.loss_max)
        } else {
            0.0
        };
        let cell = preset.cell.clone().aged(loss);
        let load = LoadProfile::Constant(rng.gen_range(0.0..=cfg.load_max_ma));
        let temp_c = rng.gen_range(cfg.temp_min_c..=cfg.temp_max_c);
        let device_id = format!("dev-{i:04}");

        for e in 0..cfg.events_per_device {
            let params = SimParams {
                start_soc: rng.gen_range(cfg.start_soc_min..=cfg.start_soc_max),
                dt_s: cfg.dt_s,
                temp_c,
            };
            let opts = SimOptions {
                device_id: device_id.clone(),
                model_id: preset.model_id.to_string(),
                t0_epoch_s: cfg.t0_epoch_s + i as i64 * 3600 + e as i64 * 43_200,
                jitter_s: cfg.jitter_s,
                seed: rng.gen(),
                cpu: rng.gen_range(0.0..=0.2),
                stall_timeout_s: 2.0 * 86400.0,
            };
            let (event_samples, _) = simulate_charge_detailed(
                &cell,
                &preset.ac_charger,
                &preset.controller,
                &load,
                &params,
                &opts,
            )?;
            samples.extend(event_samples);
        }

        truths.push(DeviceTruth {
            device_id,
            model_id: preset.model_id.to_string(),
            fcc_new_mah: cell.fcc_new_mah,
            fcc_now_mah: cell.fcc_now_mah,
            loss_fraction: loss,
            c_new_ac: preset.c_new_ac(),
        });
    }
    Ok((samples, truths))
}
