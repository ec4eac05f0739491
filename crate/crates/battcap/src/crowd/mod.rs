//! Crowdsourced capacity-loss pipeline: filter and segment fleet telemetry,
//! build per-model reference voltage/time curves and the reference C-rate,
//! then compare each device's recent charging rate against its model's
//! reference to quantify capacity loss.

mod assess;
mod preprocess;
mod reference;
mod report;

pub use assess::{assess_device, AssessConfig, DeviceAssessment, DeviceStatus};
pub use preprocess::{preprocess, ChargingEvent, EventSample, PreprocessConfig, Preprocessed};
pub use reference::{
    build_reference, infer_v_max_mv, ReferenceConfig, ReferenceModel, REFERENCE_FORMAT_VERSION,
};
pub use report::{fleet_report, ModelSummary};

use thiserror::Error;

/// Why a model could not get a reference curve.
#[derive(Debug, Error)]
pub enum CrowdError {
    /// Fewer samples than the reference floor.
    #[error("insufficient samples: {got} < {need}")]
    InsufficientSamples { got: usize, need: usize },
    /// Too little per-SOC coverage before interpolation.
    #[error("too sparse: {coverage:.0}% of soc entries populated, need {need:.0}%")]
    TooSparse { coverage: f64, need: f64 },
    /// The aggregated voltage curve never approaches the maximum voltage.
    #[error("reference curve never reaches the maximum voltage")]
    NoCcPhase,
    /// The detected CC phase is too short to carry a rate.
    #[error("cc phase ends at soc {mcc}, too short for a reference rate")]
    CcTooShort { mcc: u8 },
    /// Curve processing failed.
    #[error(transparent)]
    Stats(#[from] crate::stats::StatsError),
    /// Rate computation failed.
    #[error(transparent)]
    Estimator(#[from] crate::estimator::EstimatorError),
    /// A persisted reference has an unknown format version.
    #[error("unsupported reference format version {0}")]
    UnsupportedVersion(u32),
}

impl CrowdError {
    /// Stable machine-readable reason for reject listings.
    pub fn reason_code(&self) -> &'static str {
        match self {
            CrowdError::InsufficientSamples { .. } => "insufficient_samples",
            CrowdError::TooSparse { .. } => "too_sparse",
            CrowdError::NoCcPhase => "no_cc_phase",
            CrowdError::CcTooShort { .. } => "cc_too_short",
            CrowdError::Stats(_) => "curve_error",
            CrowdError::Estimator(_) => "rate_error",
            CrowdError::UnsupportedVersion(_) => "unsupported_version",
        }
    }
}
