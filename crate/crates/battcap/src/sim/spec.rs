use serde::{Deserialize, Serialize};

use super::sample::ChargerKind;
use super::SimError;

/// OCV rise per percent once the cell is charged past its last curve knot.
/// Real cells saturate steeply at top of charge; this keeps the CV tail short
/// so total delivered charge stays within 1% of capacity.
const SATURATION_SLOPE_MV_PER_PCT: f64 = 40.0;

/// Piecewise-linear open-circuit voltage curve over state of charge.
///
/// Knots are `(soc_percent, voltage_mv)` pairs with strictly increasing SOC
/// and nondecreasing voltage. Queries below the first knot clamp to it;
/// queries above the last knot extrapolate at a steep saturation slope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct OcvCurve {
    knots: Vec<(f64, f64)>,
}

impl OcvCurve {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self, SimError> {
        if knots.len() < 2 {
            return Err(SimError::InvalidSpec(
                "ocv curve needs at least 2 knots".into(),
            ));
        }
        for w in knots.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(SimError::InvalidSpec(
                    "ocv curve soc values must be strictly increasing".into(),
                ));
            }
            if w[1].1 < w[0].1 {
                return Err(SimError::InvalidSpec(
                    "ocv curve must be nondecreasing in voltage".into(),
                ));
            }
        }
        for &(soc, mv) in &knots {
            if !(0.0..=100.0).contains(&soc) || !mv.is_finite() || mv <= 0.0 {
                return Err(SimError::InvalidSpec(format!(
                    "ocv knot ({soc}, {mv}) out of range"
                )));
            }
        }
        Ok(Self { knots })
    }

    /// Default 4.2 V-class curve: 3.40 V at 0%, 3.60 V at 10%, 4.10 V at 90%,
    /// 4.18 V at 100%. Reproduces the sharp rise over the first battery
    /// levels followed by a nearly linear climb.
    pub fn default_4v2() -> Self {
        Self::new(vec![
            (0.0, 3400.0),
            (10.0, 3600.0),
            (90.0, 4100.0),
            (100.0, 4180.0),
        ])
        .expect("default curve is valid")
    }

    /// Open-circuit voltage in mV at the given SOC (percent, may exceed 100
    /// during the final trickle; extrapolates at the saturation slope).
    pub fn voltage_mv(&self, soc: f64) -> f64 {
        let first = self.knots[0];
        if soc <= first.0 {
            return first.1;
        }
        let last = *self.knots.last().expect("nonempty");
        if soc > last.0 {
            return last.1 + (soc - last.0) * SATURATION_SLOPE_MV_PER_PCT;
        }
        for w in self.knots.windows(2) {
            let (s0, v0) = w[0];
            let (s1, v1) = w[1];
            if soc <= s1 {
                return v0 + (v1 - v0) * (soc - s0) / (s1 - s0);
            }
        }
        last.1
    }

    /// Voltage of the last knot (nominal full-charge OCV).
    pub fn top_voltage_mv(&self) -> f64 {
        self.knots.last().expect("nonempty").1
    }
}

impl TryFrom<Vec<(f64, f64)>> for OcvCurve {
    type Error = SimError;
    fn try_from(knots: Vec<(f64, f64)>) -> Result<Self, Self::Error> {
        Self::new(knots)
    }
}

impl From<OcvCurve> for Vec<(f64, f64)> {
    fn from(c: OcvCurve) -> Self {
        c.knots
    }
}

/// Physical parameters of a (possibly aged) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    /// Labeled capacity when new, mAh.
    pub fcc_new_mah: f64,
    /// Present capacity, mAh. The simulator's ground truth.
    pub fcc_now_mah: f64,
    /// CV threshold voltage, mV (4200 or 4350 on real devices).
    pub v_max_mv: f64,
    /// Open-circuit voltage curve.
    pub ocv: OcvCurve,
    /// Internal resistance at reference temperature, milliohm.
    pub r_internal_mohm: f64,
    /// Termination C-rate of the charging controller.
    pub cutoff_c_rate: f64,
    /// Exponent linking resistance growth to capacity loss:
    /// `r_eff = r_internal * (fcc_new/fcc_now)^k`.
    pub r_aging_exponent: f64,
}

impl CellSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.fcc_new_mah.is_finite() && self.fcc_new_mah > 0.0) {
            return Err(SimError::InvalidSpec("fcc_new_mah must be > 0".into()));
        }
        if !(self.fcc_now_mah.is_finite() && self.fcc_now_mah > 0.0) {
            return Err(SimError::InvalidSpec("fcc_now_mah must be > 0".into()));
        }
        // One lab battery measured 6% above its label; allow up to 10%.
        if self.fcc_now_mah > self.fcc_new_mah * 1.1 {
            return Err(SimError::InvalidSpec(format!(
                "fcc_now_mah {} exceeds 1.1 x fcc_new_mah {}",
                self.fcc_now_mah, self.fcc_new_mah
            )));
        }
        if self.ocv.voltage_mv(100.0) > self.v_max_mv {
            return Err(SimError::InvalidSpec(
                "ocv at 100% must not exceed v_max_mv".into(),
            ));
        }
        if !(self.r_internal_mohm.is_finite() && self.r_internal_mohm > 0.0) {
            return Err(SimError::InvalidSpec("r_internal_mohm must be > 0".into()));
        }
        if !(self.cutoff_c_rate > 0.0 && self.cutoff_c_rate < 1.0) {
            return Err(SimError::InvalidSpec(
                "cutoff_c_rate must be in (0, 1)".into(),
            ));
        }
        if !self.r_aging_exponent.is_finite() || self.r_aging_exponent < 0.0 {
            return Err(SimError::InvalidSpec(
                "r_aging_exponent must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Effective series resistance at the given temperature, milliohm.
    pub fn r_eff_mohm(&self, temp_c: f64) -> f64 {
        self.r_internal_mohm
            * (self.fcc_new_mah / self.fcc_now_mah).powf(self.r_aging_exponent)
            * temp_factor(temp_c)
    }

    /// Copy of this cell with `loss` (fraction of the new capacity) applied.
    pub fn aged(mut self, loss: f64) -> Self {
        self.fcc_now_mah = self.fcc_new_mah * (1.0 - loss);
        self
    }
}

/// Temperature multiplier on internal resistance: 1.0 in the 21-40 °C band,
/// rising linearly below 21 °C up to x3 at 0 °C. Qualitative only.
pub fn temp_factor(temp_c: f64) -> f64 {
    if temp_c >= 21.0 {
        1.0
    } else {
        1.0 + (21.0 - temp_c) * (2.0 / 21.0)
    }
}

/// Charger output limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChargerSpec {
    pub max_current_ma: f64,
    pub kind: ChargerKind,
}

impl ChargerSpec {
    pub fn ac(max_current_ma: f64) -> Self {
        Self {
            max_current_ma,
            kind: ChargerKind::Ac,
        }
    }

    pub fn usb(max_current_ma: f64) -> Self {
        Self {
            max_current_ma,
            kind: ChargerKind::Usb,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.max_current_ma.is_finite() && self.max_current_ma > 0.0) {
            return Err(SimError::InvalidSpec(
                "charger max_current_ma must be > 0".into(),
            ));
        }
        if self.kind == ChargerKind::None {
            return Err(SimError::InvalidSpec(
                "charger kind must be ac or usb".into(),
            ));
        }
        Ok(())
    }
}

/// Charging-controller current limit. The controller draws
/// `min(charger output, controller current)` and may derate it slightly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerSpec {
    pub max_current_ma: f64,
    /// Fraction in (0, 1] applied to the min-rule result.
    pub derating: f64,
}

impl ControllerSpec {
    pub fn new(max_current_ma: f64) -> Self {
        Self {
            max_current_ma,
            derating: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.max_current_ma.is_finite() && self.max_current_ma > 0.0) {
            return Err(SimError::InvalidSpec(
                "controller max_current_ma must be > 0".into(),
            ));
        }
        if !(self.derating > 0.0 && self.derating <= 1.0) {
            return Err(SimError::InvalidSpec("derating must be in (0, 1]".into()));
        }
        Ok(())
    }
}

/// One step of a piecewise-constant system load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadStep {
    /// Time offset from the start of charging, seconds.
    pub from_s: f64,
    /// System current draw from then on, mA.
    pub i_sys_ma: f64,
}

/// System current draw over time. Constant 0 models a device charged in
/// airplane mode; a constant ~10 mA models an idle device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LoadProfile {
    Constant(f64),
    Steps(Vec<LoadStep>),
}

impl LoadProfile {
    pub fn idle() -> Self {
        LoadProfile::Constant(0.0)
    }

    pub fn i_sys_ma(&self, t_s: f64) -> f64 {
        match self {
            LoadProfile::Constant(i) => *i,
            LoadProfile::Steps(steps) => steps
                .iter()
                .take_while(|s| s.from_s <= t_s)
                .last()
                .map(|s| s.i_sys_ma)
                .unwrap_or(0.0),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let ok = match self {
            LoadProfile::Constant(i) => i.is_finite() && *i >= 0.0,
            LoadProfile::Steps(steps) => {
                steps.iter().all(|s| s.i_sys_ma.is_finite() && s.i_sys_ma >= 0.0)
                    && steps.windows(2).all(|w| w[0].from_s <= w[1].from_s)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(SimError::InvalidSpec(
                "load profile currents must be >= 0 and steps time-ordered".into(),
            ))
        }
    }
}

/// A device model bundled with its stock charging hardware.
#[derive(Debug, Clone)]
pub struct ModelPreset {
    pub model_id: &'static str,
    pub cell: CellSpec,
    pub controller: ControllerSpec,
    pub ac_charger: ChargerSpec,
    pub usb_charger: ChargerSpec,
}

impl ModelPreset {
    /// New-battery AC charging C-rate implied by the preset.
    pub fn c_new_ac(&self) -> f64 {
        super::charge::effective_charger_current_ma(&self.ac_charger, &self.controller)
            / self.cell.fcc_new_mah
    }
}

/// Built-in model presets. Capacities and controller currents follow the
/// lab-measured handsets; internal resistances are chosen so a new battery
/// ends its CC phase at the observed SOC (74, 85, and 76 respectively).
pub fn model_preset(model_id: &str) -> Option<ModelPreset> {
    let cell = |fcc: f64, r: f64| CellSpec {
        fcc_new_mah: fcc,
        fcc_now_mah: fcc,
        v_max_mv: 4200.0,
        ocv: OcvCurve::default_4v2(),
        r_internal_mohm: r,
        cutoff_c_rate: 0.07,
        r_aging_exponent: 1.0,
    };
    let usb = ChargerSpec::usb(426.0);
    match model_id {
        "GT-I9100" => Some(ModelPreset {
            model_id: "GT-I9100",
            cell: cell(1650.0, 235.0),
            controller: ControllerSpec::new(645.0),
            ac_charger: ChargerSpec::ac(700.0),
            usb_charger: usb,
        }),
        "GT-I9300" => Some(ModelPreset {
            model_id: "GT-I9300",
            cell: cell(2100.0, 90.0),
            controller: ControllerSpec::new(925.0),
            ac_charger: ChargerSpec::ac(1000.0),
            usb_charger: usb,
        }),
        "GT-I9505" => Some(ModelPreset {
            model_id: "GT-I9505",
            cell: cell(2600.0, 90.0),
            controller: ControllerSpec::new(1560.0),
            ac_charger: ChargerSpec::ac(2100.0),
            usb_charger: usb,
        }),
        _ => None,
    }
}

/// Model ids with built-in presets.
pub fn preset_ids() -> &'static [&'static str] {
    &["GT-I9100", "GT-I9300", "GT-I9505"]
}
