//! CC-CV charging simulation of lithium-ion cells behind a smartphone
//! charging controller.
//!
//! The simulator integrates coulombs with a fixed-step Euler scheme and emits
//! one telemetry sample per integer SOC transition, the way Android's
//! BatteryManager broadcasts level changes. Terminal voltage follows the
//! series-resistance circuit model: `V = OCV(SOC) + I_bat * R_eff`, where
//! `R_eff` grows with capacity loss and with low temperature. The constant
//! current phase ends when `V` reaches the maximum charging voltage; during
//! the constant voltage phase the current tapers as `(V_max - OCV)/R_eff`
//! until it falls to the cutoff C-rate.

mod charge;
mod fleet;
mod sample;
mod spec;

pub use charge::{
    battery_current_ma, effective_charger_current_ma, measure_fcc_by_discharge, simulate_charge,
    simulate_charge_detailed, ChargeStats, SimOptions, SimParams,
};
pub use fleet::{generate_fleet, DeviceTruth, FleetConfig};
pub use sample::{BatteryHealth, ChargerKind, ChargingSample};
pub use spec::{
    model_preset, preset_ids, temp_factor, CellSpec, ChargerSpec, ControllerSpec, LoadProfile,
    LoadStep, ModelPreset, OcvCurve,
};

use thiserror::Error;

/// Simulation failures.
#[derive(Debug, Error)]
pub enum SimError {
    /// A cell, charger, controller, load, or parameter invariant is violated.
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    /// SOC failed to advance within the configured wall-time bound, e.g.
    /// because the system load meets or exceeds the charger output.
    #[error("charging did not converge: {0}")]
    NonConvergence(String),
}
