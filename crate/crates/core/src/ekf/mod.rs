//! Clone-state error-state EKF fusing strap-down propagation with window
//! displacement measurements.

use nalgebra::SMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::EventError;
use crate::lie::LieError;
use crate::preint::PreintError;

mod filter;
mod prior;
mod run;

pub use filter::{
    boxminus, boxplus, propagate_nominal, propagation_jacobians, yaw_jacobian, ClonePose,
    DisplacementMeasurement, FilterState, Matrix15, Matrix15x12, NavState, UpdateReport, Vector12,
    Vector15, CLONE_DIM, RENORMALIZE_EVERY, STATE_DIM,
};
pub use prior::{DisplacementPrior, OraclePrior, PriorInput, VARIANCE_FLOOR};
pub use run::{run_filter, window_samples, FilterConfig, InitialCovariance};

#[derive(Debug, Error)]
pub enum EkfError {
    #[error("timestamp {t} is before the filter time {last}")]
    NonMonotone { t: f64, last: f64 },
    #[error("no IMU sample has been received yet")]
    NoImu,
    #[error("clone index {0} out of range")]
    CloneIndex(usize),
    #[error("innovation covariance is not positive definite")]
    SingularInnovation,
    #[error("invalid filter configuration: {0}")]
    InvalidConfig(String),
    #[error("ground truth does not cover t = {0}")]
    NoGroundTruth(f64),
    #[error(transparent)]
    Event(#[from] EventError),
    #[error(transparent)]
    Preint(#[from] PreintError),
    #[error(transparent)]
    Lie(#[from] LieError),
}

/// Continuous-time noise densities: white noise in `rad/s/sqrt(Hz)` and
/// `m/s^2/sqrt(Hz)`, bias random walks per `sqrt(s)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseParams {
    pub gyro_noise: f64,
    pub accel_noise: f64,
    pub gyro_bias_drift: f64,
    pub accel_bias_drift: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            gyro_noise: 1e-3,
            accel_noise: 1e-2,
            gyro_bias_drift: 1e-5,
            accel_bias_drift: 1e-4,
        }
    }
}

impl NoiseParams {
    pub fn zero() -> Self {
        Self {
            gyro_noise: 0.0,
            accel_noise: 0.0,
            gyro_bias_drift: 0.0,
            accel_bias_drift: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), EkfError> {
        let all = [self.gyro_noise, self.accel_noise, self.gyro_bias_drift, self.accel_bias_drift];
        if all.iter().all(|x| *x >= 0.0 && x.is_finite()) {
            Ok(())
        } else {
            Err(EkfError::InvalidConfig("noise densities must be finite and >= 0".into()))
        }
    }

    /// Discrete covariance `W` of `(eta_g, eta_a, eta_gd, eta_ad)` for a step `dt`.
    pub fn covariance(&self, dt: f64) -> SMatrix<f64, 12, 12> {
        let mut w = SMatrix::<f64, 12, 12>::zeros();
        if dt <= 0.0 {
            return w;
        }
        let d = [self.gyro_noise, self.accel_noise, self.gyro_bias_drift, self.accel_bias_drift];
        for (b, s) in d.iter().enumerate() {
            for k in 0..3 {
                w[(3 * b + k, 3 * b + k)] = s * s / dt;
            }
        }
        w
    }
}

#[cfg(test)]
mod tests;
