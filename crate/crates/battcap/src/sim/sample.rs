use serde::{Deserialize, Serialize};

/// Charger type reported with a telemetry sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChargerKind {
    Ac,
    Usb,
    None,
}

/// Battery health reported by the fuel gauge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BatteryHealth {
    Good,
    Dead,
    Cold,
    Other,
}

/// One BatteryManager-style telemetry record.
///
/// Serialized field names are the wire format of the JSONL sample files;
/// unknown fields in input are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChargingSample {
    /// Epoch seconds when the sample was captured.
    pub t: i64,
    /// Battery level percent, 0-100.
    pub soc: u8,
    /// Battery terminal voltage, mV.
    pub voltage_mv: i32,
    /// Battery temperature, degrees Celsius.
    pub temp_c: f64,
    pub charger: ChargerKind,
    pub health: BatteryHealth,
    /// CPU load fraction, 0-1.
    pub cpu: f64,
    pub device_id: String,
    pub model_id: String,
}

impl ChargingSample {
    /// Check the record invariants; violations mark the sample malformed.
    pub fn validate(&self) -> Result<(), String> {
        if self.soc > 100 {
            return Err(format!("soc {} out of range", self.soc));
        }
        if !(2500..=4600).contains(&self.voltage_mv) {
            return Err(format!("voltage_mv {} out of range", self.voltage_mv));
        }
        if !self.temp_c.is_finite() {
            return Err("temp_c not finite".into());
        }
        if !(0.0..=1.0).contains(&self.cpu) {
            return Err(format!("cpu {} out of range", self.cpu));
        }
        if self.device_id.is_empty() {
            return Err("empty device_id".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ChargingSample {
        ChargingSample {
            t: 1_700_000_000,
            soc: 42,
            voltage_mv: 3900,
            temp_c: 25.0,
            charger: ChargerKind::Ac,
            health: BatteryHealth::Good,
            cpu: 0.05,
            device_id: "dev-0001".into(),
            model_id: "GT-I9300".into(),
        }
    }

    #[test]
    fn wire_field_names_are_stable() {
        let json = serde_json::to_string(&sample()).unwrap();
        for field in [
            "\"t\":", "\"soc\":", "\"voltage_mv\":", "\"temp_c\":", "\"charger\":\"ac\"",
            "\"health\":\"good\"", "\"cpu\":", "\"device_id\":", "\"model_id\":",
        ] {
            assert!(json.contains(field), "missing {field} in {json}");
        }
    }

    #[test]
    fn unknown_fields_are_ignored_on_parse() {
        let json = r#"{"t":1,"soc":10,"voltage_mv":3700,"temp_c":24.0,"charger":"usb",
            "health":"good","cpu":0.0,"device_id":"d","model_id":"m","extra":"ignored"}"#;
        let s: ChargingSample = serde_json::from_str(json).unwrap();
        assert_eq!(s.charger, ChargerKind::Usb);
    }

    #[test]
    fn validate_rejects_out_of_range_voltage() {
        let mut s = sample();
        s.voltage_mv = 2400;
        assert!(s.validate().is_err());
        s.voltage_mv = 4700;
        assert!(s.validate().is_err());
    }
}
