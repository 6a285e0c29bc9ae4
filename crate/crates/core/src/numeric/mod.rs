//! Iterated logarithms, ODE integration, smallness thresholds, decay fits
//! and the verification pipeline.

pub mod calibrate;
pub mod fit;
pub mod integrate;
pub mod iterlog;
pub mod quadrature;
pub mod series;
pub mod thresholds;
pub mod verify;

use serde::Serialize;

pub use calibrate::{calibrate_resonance, Calibration, CalibrationFit};
pub use fit::{decay_exponent_fit, DecayFit};
pub use integrate::{integrate, integrate_rhs, IntegratorOptions};
pub use quadrature::{kernel_convolution_check, log_product_ratio};
pub use series::SeriesEvaluator;
pub use thresholds::{apriori_decay, smallness_thresholds, AprioriDecay, Thresholds};
pub use verify::{verify, InitialCondition, Spacing, Trace, Verdict, Verification, VerificationReport, VerifyProtocol};

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IntegratorStats {
    pub steps: usize,
    pub rejected: usize,
    /// Largest accepted scaled error estimate (at most 1 in adaptive mode).
    pub max_error: f64,
}

/// Solution samples of `y' = -Ay + G(y) + f(t)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub stats: IntegratorStats,
}
