//! Battery full-charge-capacity (FCC) estimation from charging telemetry.
//!
//! Lithium-ion smartphone batteries lose capacity as they age, and the loss is
//! visible in ordinary charging telemetry: an aged battery reaches the maximum
//! charging voltage at a lower state of charge, and its capacity-relative
//! charging rate (C-rate) during the constant-current phase is higher than
//! when the battery was new. This crate turns those observations into tools:
//!
//! - [`sim`] — a CC-CV charging simulator that emits per-SOC telemetry samples
//!   for a cell with configurable capacity loss. It doubles as the ground-truth
//!   oracle for the estimator and as a synthetic-fleet generator.
//! - [`estimator`] — C-rate computation from SOC update timestamps, CC-phase
//!   end detection from voltage curves, FCC estimation from the ratio of
//!   charging rates, and an exponential capacity-vs-rate model.
//! - [`stats`] — the statistical primitives the pipeline needs: a skewness
//!   direction test, iterative Grubbs outlier rejection, and linear
//!   interpolation of sparse per-SOC curves.
//! - [`crowd`] — a batch pipeline that builds per-model reference curves from
//!   fleet telemetry and flags devices with degraded batteries.
//! - [`io`] — the JSONL sample format and reference-model persistence.

pub mod crowd;
pub mod estimator;
pub mod io;
pub mod sim;
pub mod stats;

pub use crowd::{
    assess_device, build_reference, fleet_report, preprocess, AssessConfig, ChargingEvent,
    CrowdError, DeviceAssessment, DeviceStatus, ModelSummary, PreprocessConfig, Preprocessed,
    ReferenceConfig, ReferenceModel,
};
pub use estimator::{
    build_capacity_profile, c_rate_over_interval, cumulative_rate_curve, detect_cc_end,
    estimate_fcc, estimate_from_samples, fit_exp_model, select_c_rate, CRate, CcDetection,
    EstimatorError, ExpCapacityModel, FccEstimate, ProfilePoint, RateCurve, RateStrategy,
};
pub use sim::{
    battery_current_ma, effective_charger_current_ma, generate_fleet, measure_fcc_by_discharge,
    model_preset, simulate_charge, simulate_charge_detailed, BatteryHealth, CellSpec, ChargerKind,
    ChargerSpec, ChargingSample, ControllerSpec, DeviceTruth, FleetConfig, LoadProfile,
    ModelPreset, OcvCurve, SimError, SimOptions, SimParams,
};
pub use stats::{TimeCurve, VoltageCurve};

/// Seconds to charge one SOC percent at a rate of 1 C.
pub const SECONDS_PER_PERCENT_AT_1C: f64 = 36.0;

/// Longest possible time to charge one percent: the charging controller
/// terminates at the 0.07 C cutoff, so one percent takes at most 36/0.07 s.
pub const MAX_SECONDS_PER_PERCENT: f64 = SECONDS_PER_PERCENT_AT_1C / 0.07;

/// Inter-sample gap (integer seconds) beyond which two samples cannot belong
/// to the same charging event.
pub const EVENT_GAP_LIMIT_S: i64 = 514;
