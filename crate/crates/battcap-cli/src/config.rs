use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use battcap::sim::{
    model_preset, CellSpec, ChargerSpec, ControllerSpec, FleetConfig, LoadProfile, OcvCurve,
    SimOptions, SimParams,
};
use battcap::{AssessConfig, PreprocessConfig, ReferenceConfig};

use crate::CliError;

/// Environment variable consulted for the config path when `--config` is
/// not given.
pub const CONFIG_ENV_VAR: &str = "BATTCAP_CONFIG";

/// Every key the config file accepts, with its default.
pub const KNOWN_KEYS: &[(&str, &str)] = &[
    ("seed", "42"),
    ("sim.kind", "cell"),
    ("sim.dt_s", "1.0"),
    ("sim.t0_epoch_s", "1700000000"),
    ("cell.model", "GT-I9300"),
    ("cell.loss", "0.0"),
    ("cell.charger", "ac"),
    ("cell.load_ma", "0"),
    ("cell.start_soc", "2"),
    ("cell.temp_c", "25"),
    ("cell.jitter_s", "0"),
    ("cell.device_id", "dev-0000"),
    ("cell.fcc_new_mah", "<preset>"),
    ("cell.v_max_mv", "<preset>"),
    ("cell.r_internal_mohm", "<preset>"),
    ("cell.cutoff_c_rate", "<preset>"),
    ("cell.r_aging_exponent", "<preset>"),
    ("cell.ocv", "<preset>"),
    ("charger.max_current_ma", "<preset>"),
    ("controller.max_current_ma", "<preset>"),
    ("controller.derating", "1.0"),
    ("fleet.models", "GT-I9300"),
    ("fleet.devices", "100"),
    ("fleet.degraded_fraction", "0.3"),
    ("fleet.loss_min", "0.10"),
    ("fleet.loss_max", "0.50"),
    ("fleet.events_per_device", "2"),
    ("fleet.jitter_s", "2"),
    ("fleet.start_soc_min", "5"),
    ("fleet.start_soc_max", "50"),
    ("fleet.temp_min_c", "22"),
    ("fleet.temp_max_c", "38"),
    ("fleet.load_max_ma", "5"),
    ("estimator.tol_mv", "50"),
    ("estimator.vmax_mv", "4200"),
    ("estimator.strategy", "at-cc-end"),
    ("crowd.min_model_samples", "250"),
    ("crowd.min_user_samples", "25"),
    ("crowd.coverage_floor", "0.6"),
    ("crowd.temp_min_c", "21"),
    ("crowd.temp_max_c", "40"),
    ("crowd.skew_alpha", "0.05"),
    ("crowd.grubbs_alpha", "0.05"),
    ("crowd.tol_mv", "50"),
    ("crowd.recent_window_days", "30"),
    ("crowd.max_cpu", "<unset>"),
];

/// Plain-text `key=value` run configuration. Defaults match the documented
/// pipeline thresholds; the CLI flags override file values.
#[derive(Debug, Default, Clone)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

/// A configured simulation: one cell or a whole fleet.
pub enum SimJob {
    Cell(Box<CellJob>),
    Fleet(FleetConfig),
}

pub struct CellJob {
    pub model_id: String,
    pub cell: CellSpec,
    pub charger: ChargerSpec,
    pub controller: ControllerSpec,
    pub load: LoadProfile,
    pub params: SimParams,
    pub opts: SimOptions,
}

impl RunConfig {
    /// Load from `--config`, else `$BATTCAP_CONFIG`, else all defaults.
    pub fn load(flag: Option<&Path>) -> Result<Self, CliError> {
        let path: Option<PathBuf> = match flag {
            Some(p) => Some(p.to_path_buf()),
            None => std::env::var_os(CONFIG_ENV_VAR).map(PathBuf::from),
        };
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(&p).map_err(|e| {
                    CliError::Config(format!("cannot read config {}: {e}", p.display()))
                })?;
                Self::parse(&text).map_err(CliError::Config)
            }
        }
    }

    /// Parse `key=value` lines; `#` starts a comment; unknown keys are
    /// rejected so typos fail loudly.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key=value, got {raw:?}", lineno + 1))?;
            let key = key.trim();
            let value = value.trim();
            if !KNOWN_KEYS.iter().any(|(k, _)| *k == key) {
                return Err(format!("line {}: unknown config key {key:?}", lineno + 1));
            }
            values.insert(key.to_string(), value.to_string());
        }
        Ok(Self { values })
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    fn parse_num<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, String>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(default),
            Some(raw) => raw.parse().map_err(|e| format!("config {key}={raw}: {e}")),
        }
    }

    pub fn seed(&self) -> Result<u64, String> {
        self.parse_num("seed", 42)
    }

    pub fn tol_mv(&self) -> Result<f64, String> {
        self.parse_num("estimator.tol_mv", 50.0)
    }

    pub fn vmax_mv(&self) -> Result<f64, String> {
        self.parse_num("estimator.vmax_mv", 4200.0)
    }

    pub fn strategy(&self) -> Result<battcap::RateStrategy, String> {
        match self.get("estimator.strategy") {
            None => Ok(battcap::RateStrategy::AtCcEnd),
            Some(raw) => raw.parse(),
        }
    }

    pub fn preprocess_config(&self) -> Result<PreprocessConfig, String> {
        let mut cfg = PreprocessConfig {
            temp_min_c: self.parse_num("crowd.temp_min_c", 21.0)?,
            temp_max_c: self.parse_num("crowd.temp_max_c", 40.0)?,
            ..PreprocessConfig::default()
        };
        if let Some(raw) = self.get("crowd.max_cpu") {
            if !raw.is_empty() {
                cfg.max_cpu =
                    Some(raw.parse().map_err(|e| format!("config crowd.max_cpu={raw}: {e}"))?);
            }
        }
        Ok(cfg)
    }

    pub fn reference_config(&self) -> Result<ReferenceConfig, String> {
        Ok(ReferenceConfig {
            min_model_samples: self.parse_num("crowd.min_model_samples", 250)?,
            coverage_floor: self.parse_num("crowd.coverage_floor", 0.6)?,
            skew_alpha: self.parse_num("crowd.skew_alpha", 0.05)?,
            grubbs_alpha: self.parse_num("crowd.grubbs_alpha", 0.05)?,
            tol_mv: self.parse_num("crowd.tol_mv", 50.0)?,
        })
    }

    pub fn assess_config(&self) -> Result<AssessConfig, String> {
        Ok(AssessConfig {
            min_user_samples: self.parse_num("crowd.min_user_samples", 25)?,
            recent_window_s: self.parse_num("crowd.recent_window_days", 30i64)? * 86_400,
            tol_mv: self.parse_num("crowd.tol_mv", 50.0)?,
            grubbs_alpha: self.parse_num("crowd.grubbs_alpha", 0.05)?,
        })
    }

    /// Assemble the configured simulation job.
    pub fn sim_job(&self, seed_flag: Option<u64>) -> Result<SimJob, String> {
        let seed = match seed_flag {
            Some(s) => s,
            None => self.seed()?,
        };
        match self.get("sim.kind").unwrap_or("cell") {
            "cell" => self.cell_job(seed).map(|j| SimJob::Cell(Box::new(j))),
            "fleet" => self.fleet_config(seed).map(SimJob::Fleet),
            other => Err(format!("config sim.kind={other}: expected cell or fleet")),
        }
    }

    fn cell_job(&self, seed: u64) -> Result<CellJob, String> {
        let model_id = self.get("cell.model").unwrap_or("GT-I9300").to_string();
        let preset = model_preset(&model_id)
            .ok_or_else(|| format!("config cell.model={model_id}: no such preset"))?;

        let mut cell = preset.cell.clone();
        cell.fcc_new_mah = self.parse_num("cell.fcc_new_mah", cell.fcc_new_mah)?;
        cell.v_max_mv = self.parse_num("cell.v_max_mv", cell.v_max_mv)?;
        cell.r_internal_mohm = self.parse_num("cell.r_internal_mohm", cell.r_internal_mohm)?;
        cell.cutoff_c_rate = self.parse_num("cell.cutoff_c_rate", cell.cutoff_c_rate)?;
        cell.r_aging_exponent = self.parse_num("cell.r_aging_exponent", cell.r_aging_exponent)?;
        if let Some(raw) = self.get("cell.ocv") {
            cell.ocv = parse_ocv(raw)?;
        }
        let loss: f64 = self.parse_num("cell.loss", 0.0)?;
        cell.fcc_now_mah = cell.fcc_new_mah * (1.0 - loss);

        let mut charger = match self.get("cell.charger").unwrap_or("ac") {
            "ac" => preset.ac_charger.clone(),
            "usb" => preset.usb_charger.clone(),
            other => return Err(format!("config cell.charger={other}: expected ac or usb")),
        };
        charger.max_current_ma = self.parse_num("charger.max_current_ma", charger.max_current_ma)?;

        let controller = ControllerSpec {
            max_current_ma: self
                .parse_num("controller.max_current_ma", preset.controller.max_current_ma)?,
            derating: self.parse_num("controller.derating", preset.controller.derating)?,
        };

        let load = LoadProfile::Constant(self.parse_num("cell.load_ma", 0.0)?);
        let params = SimParams {
            start_soc: self.parse_num("cell.start_soc", 2u8)?,
            dt_s: self.parse_num("sim.dt_s", 1.0)?,
            temp_c: self.parse_num("cell.temp_c", 25.0)?,
        };
        let opts = SimOptions {
            device_id: self.get("cell.device_id").unwrap_or("dev-0000").to_string(),
            model_id,
            t0_epoch_s: self.parse_num("sim.t0_epoch_s", 1_700_000_000i64)?,
            jitter_s: self.parse_num("cell.jitter_s", 0.0)?,
            seed,
            ..SimOptions::default()
        };
        Ok(CellJob {
            model_id: opts.model_id.clone(),
            cell,
            charger,
            controller,
            load,
            params,
            opts,
        })
    }

    fn fleet_config(&self, seed: u64) -> Result<FleetConfig, String> {
        let defaults = FleetConfig::default();
        let models = match self.get("fleet.models") {
            None => defaults.models,
            Some(raw) => raw.split(',').map(|m| m.trim().to_string()).collect(),
        };
        Ok(FleetConfig {
            models,
            devices: self.parse_num("fleet.devices", defaults.devices)?,
            degraded_fraction: self.parse_num("fleet.degraded_fraction", defaults.degraded_fraction)?,
            loss_min: self.parse_num("fleet.loss_min", defaults.loss_min)?,
            loss_max: self.parse_num("fleet.loss_max", defaults.loss_max)?,
            events_per_device: self.parse_num("fleet.events_per_device", defaults.events_per_device)?,
            jitter_s: self.parse_num("fleet.jitter_s", defaults.jitter_s)?,
            dt_s: self.parse_num("sim.dt_s", defaults.dt_s)?,
            start_soc_min: self.parse_num("fleet.start_soc_min", defaults.start_soc_min)?,
            start_soc_max: self.parse_num("fleet.start_soc_max", defaults.start_soc_max)?,
            temp_min_c: self.parse_num("fleet.temp_min_c", defaults.temp_min_c)?,
            temp_max_c: self.parse_num("fleet.temp_max_c", defaults.temp_max_c)?,
            load_max_ma: self.parse_num("fleet.load_max_ma", defaults.load_max_ma)?,
            t0_epoch_s: self.parse_num("sim.t0_epoch_s", defaults.t0_epoch_s)?,
            seed,
        })
    }
}

/// Parse `soc:mv` pairs, e.g. `0:3400,10:3600,90:4100,100:4180`.
fn parse_ocv(raw: &str) -> Result<OcvCurve, String> {
    let mut knots = Vec::new();
    for part in raw.split(',') {
        let (soc, mv) = part
            .trim()
            .split_once(':')
            .ok_or_else(|| format!("config cell.ocv: expected soc:mv, got {part:?}"))?;
        let soc: f64 = soc.trim().parse().map_err(|e| format!("config cell.ocv soc: {e}"))?;
        let mv: f64 = mv.trim().parse().map_err(|e| format!("config cell.ocv mv: {e}"))?;
        knots.push((soc, mv));
    }
    OcvCurve::new(knots).map_err(|e| format!("config cell.ocv: {e}"))
}
