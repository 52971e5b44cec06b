//! IMU bias/gravity correction and on-manifold forward-Euler pre-integration.
//!
//! The pre-integrated poses form the reference signal on which Lie events
//! are sampled. Between samples the signal is the geodesic joining them.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lie::{geodesic_interp, LieError, Manifold, Pose, Rotation3};

/// Standard gravity, pointing down the world z axis.
pub const DEFAULT_GRAVITY: Vector3<f64> = Vector3::new(0.0, 0.0, -9.81);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PreintError {
    #[error("pre-integration needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("timestamps not strictly increasing at sample {index} (t = {t})")]
    NonMonotone { index: usize, t: f64 },
    #[error("non-finite IMU value at sample {0}")]
    NonFinite(usize),
    #[error("time {t} outside reference interval [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },
    #[error("gravity magnitude {0} outside [9.7, 9.9] m/s^2")]
    ImplausibleGravity(f64),
    #[error(transparent)]
    Lie(#[from] LieError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawImuSample {
    pub t: f64,
    /// Gyroscope, rad/s.
    pub omega: Vector3<f64>,
    /// Accelerometer specific force, m/s^2.
    pub accel: Vector3<f64>,
}

impl RawImuSample {
    pub fn new(t: f64, omega: Vector3<f64>, accel: Vector3<f64>) -> Self {
        Self { t, omega, accel }
    }

    fn is_finite(&self) -> bool {
        self.t.is_finite()
            && self.omega.iter().all(|x| x.is_finite())
            && self.accel.iter().all(|x| x.is_finite())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImuCalibration {
    pub bias_gyro: Vector3<f64>,
    pub bias_accel: Vector3<f64>,
    pub gravity: Vector3<f64>,
    /// Estimated gravity-aligned frame.
    pub gravity_frame: Rotation3,
}

impl Default for ImuCalibration {
    fn default() -> Self {
        Self {
            bias_gyro: Vector3::zeros(),
            bias_accel: Vector3::zeros(),
            gravity: DEFAULT_GRAVITY,
            gravity_frame: Rotation3::identity(),
        }
    }
}

impl ImuCalibration {
    /// Rejects gravity vectors whose magnitude is not Earth-like.
    pub fn validate(&self) -> Result<(), PreintError> {
        let g = self.gravity.norm();
        if (9.7..=9.9).contains(&g) {
            Ok(())
        } else {
            Err(PreintError::ImplausibleGravity(g))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectedImuSample {
    pub t: f64,
    pub omega_hat: Vector3<f64>,
    pub accel_hat: Vector3<f64>,
}

/// `w_hat = R_g (w - b_g)`, `a_hat = R_g (a - b_a) + g`.
pub fn correct_sample(raw: &RawImuSample, calib: &ImuCalibration) -> CorrectedImuSample {
    let rg = &calib.gravity_frame;
    CorrectedImuSample {
        t: raw.t,
        omega_hat: rg.rotate(&(raw.omega - calib.bias_gyro)),
        accel_hat: rg.rotate(&(raw.accel - calib.bias_accel)) + calib.gravity,
    }
}

pub fn correct_samples(raws: &[RawImuSample], calib: &ImuCalibration) -> Vec<CorrectedImuSample> {
    raws.iter().map(|r| correct_sample(r, calib)).collect()
}

/// Linear interpolation of corrected samples at `t`, clamped to the stream ends.
pub fn interpolate_corrected(samples: &[CorrectedImuSample], t: f64) -> (Vector3<f64>, Vector3<f64>) {
    match samples.len() {
        0 => (Vector3::zeros(), Vector3::zeros()),
        1 => (samples[0].omega_hat, samples[0].accel_hat),
        n => {
            let k = samples.partition_point(|s| s.t <= t);
            if k == 0 {
                return (samples[0].omega_hat, samples[0].accel_hat);
            }
            if k >= n {
                return (samples[n - 1].omega_hat, samples[n - 1].accel_hat);
            }
            let (a, b) = (&samples[k - 1], &samples[k]);
            let s = (t - a.t) / (b.t - a.t);
            (
                a.omega_hat + (b.omega_hat - a.omega_hat) * s,
                a.accel_hat + (b.accel_hat - a.accel_hat) * s,
            )
        }
    }
}

pub(crate) fn validate_stream(raws: &[RawImuSample]) -> Result<(), PreintError> {
    if raws.len() < 2 {
        return Err(PreintError::TooFewSamples(raws.len()));
    }
    for (i, r) in raws.iter().enumerate() {
        if !r.is_finite() {
            return Err(PreintError::NonFinite(i));
        }
        if i > 0 && r.t <= raws[i - 1].t {
            return Err(PreintError::NonMonotone { index: i, t: r.t });
        }
    }
    Ok(())
}

/// Pre-integrated poses and velocities at the IMU timestamps.
#[derive(Clone, Debug, PartialEq)]
pub struct PreintegrationPath {
    pub times: Vec<f64>,
    pub poses: Vec<Pose>,
    pub velocities: Vec<Vector3<f64>>,
}

impl PreintegrationPath {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn initial_velocity(&self) -> Vector3<f64> {
        self.velocities[0]
    }

    /// Terminal `(pose, velocity)`, the initial condition of a continuation.
    pub fn terminal(&self) -> (Pose, Vector3<f64>) {
        let n = self.len() - 1;
        (self.poses[n], self.velocities[n])
    }

    /// Poses re-tagged for event generation on `manifold`.
    pub fn poses_on(&self, manifold: Manifold) -> Vec<Pose> {
        self.poses.iter().map(|p| p.with_manifold(manifold)).collect()
    }
}

/// Forward-Euler pre-integration with biases frozen at the calibration values.
///
/// `poses[0] = init_pose`, and sample `i` drives the step `t_i -> t_{i+1}`;
/// the last sample's measurement is therefore unused.
pub fn preintegrate(
    raws: &[RawImuSample],
    init_pose: &Pose,
    v0: Vector3<f64>,
    calib: &ImuCalibration,
) -> Result<PreintegrationPath, PreintError> {
    validate_stream(raws)?;
    let n = raws.len();
    let mut times = Vec::with_capacity(n);
    let mut poses = Vec::with_capacity(n);
    let mut velocities = Vec::with_capacity(n);

    let g = calib.gravity;
    let mut rot = init_pose.rotation;
    let mut pos = init_pose.translation;
    let mut vel = v0;
    times.push(raws[0].t);
    poses.push(Pose::se3(rot, pos));
    velocities.push(vel);

    for w in raws.windows(2) {
        let (cur, next) = (&w[0], &w[1]);
        let dt = next.t - cur.t;
        let acc_world = rot.rotate(&(cur.accel - calib.bias_accel));
        let new_rot = rot.compose(&Rotation3::exp(&((cur.omega - calib.bias_gyro) * dt)));
        let new_vel = vel + acc_world * dt + g * dt;
        pos += vel * dt + g * (0.5 * dt * dt) + acc_world * (0.5 * dt * dt);
        rot = new_rot;
        vel = new_vel;
        times.push(next.t);
        poses.push(Pose::se3(rot, pos));
        velocities.push(vel);
    }
    Ok(PreintegrationPath {
        times,
        poses,
        velocities,
    })
}

/// The continuous reference signal: geodesic interpolation between samples.
pub fn sample_reference(path: &PreintegrationPath, t: f64) -> Result<Pose, PreintError> {
    if path.is_empty() || t < path.start() || t > path.end() {
        let (start, end) = if path.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            (path.start(), path.end())
        };
        return Err(PreintError::OutOfRange { t, start, end });
    }
    let k = path.times.partition_point(|&ti| ti <= t);
    if k == path.len() {
        return Ok(path.poses[k - 1]);
    }
    let i = k - 1;
    Ok(geodesic_interp(
        &path.poses[i],
        &path.poses[i + 1],
        path.times[i],
        path.times[i + 1],
        t,
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn stream(n: usize, dt: f64, omega: Vector3<f64>, accel: Vector3<f64>) -> Vec<RawImuSample> {
        (0..n)
            .map(|i| RawImuSample::new(i as f64 * dt, omega, accel))
            .collect()
    }

    #[test]
    fn identity_calibration_passes_gyro_through() {
        let raw = RawImuSample::new(0.0, Vector3::new(0.1, 0.0, 0.0), Vector3::zeros());
        let c = correct_sample(&raw, &ImuCalibration::default());
        assert_eq!(c.omega_hat, Vector3::new(0.1, 0.0, 0.0));
    }

    #[test]
    fn stationary_accel_cancels_gravity() {
        let raw = RawImuSample::new(0.0, Vector3::zeros(), -DEFAULT_GRAVITY);
        let c = correct_sample(&raw, &ImuCalibration::default());
        assert_eq!(c.accel_hat, Vector3::zeros());
    }

    #[test]
    fn correction_matches_scalar_evaluation() {
        let calib = ImuCalibration {
            bias_gyro: Vector3::new(0.01, -0.02, 0.005),
            bias_accel: Vector3::new(0.1, 0.05, -0.2),
            gravity: DEFAULT_GRAVITY,
            gravity_frame: Rotation3::exp(&Vector3::new(0.05, -0.1, 1.3)),
        };
        let raw = RawImuSample::new(
            1.0,
            Vector3::new(0.3, -0.2, 0.9),
            Vector3::new(0.5, 0.4, 9.7),
        );
        let c = correct_sample(&raw, &calib);
        let m = calib.gravity_frame.matrix();
        for r in 0..3 {
            let mut w = 0.0;
            let mut a = calib.gravity[r];
            for k in 0..3 {
                w += m[(r, k)] * (raw.omega[k] - calib.bias_gyro[k]);
                a += m[(r, k)] * (raw.accel[k] - calib.bias_accel[k]);
            }
            assert_relative_eq!(c.omega_hat[r], w, epsilon = 1e-15);
            assert_relative_eq!(c.accel_hat[r], a, epsilon = 1e-14);
        }
    }

    #[test]
    fn stationary_stream_stays_put() {
        let raws = stream(200, 0.005, Vector3::zeros(), -DEFAULT_GRAVITY);
        let path = preintegrate(
            &raws,
            &Pose::identity(Manifold::SE3),
            Vector3::zeros(),
            &ImuCalibration::default(),
        )
        .unwrap();
        for (p, v) in path.poses.iter().zip(&path.velocities) {
            assert_eq!(p.translation, Vector3::zeros());
            assert_eq!(*v, Vector3::zeros());
        }
    }

    #[test]
    fn constant_acceleration_matches_discrete_sum() {
        let a = Vector3::new(0.5, -0.2, 0.1);
        let dt = 0.01;
        let raws = stream(101, dt, Vector3::zeros(), a - DEFAULT_GRAVITY);
        let path = preintegrate(
            &raws,
            &Pose::identity(Manifold::SE3),
            Vector3::zeros(),
            &ImuCalibration::default(),
        )
        .unwrap();
        // sum_i (v_i dt + a dt^2 / 2), v_i = i a dt
        let mut oracle = Vector3::zeros();
        for i in 0..100 {
            oracle += a * (i as f64 * dt) * dt + a * (0.5 * dt * dt);
        }
        let end = path.terminal().0.translation;
        assert_relative_eq!(end, oracle, epsilon = 1e-12);
        assert_relative_eq!(end, a * 0.5, epsilon = 1e-12);
    }

    #[test]
    fn constant_yaw_rate_is_exact() {
        let w = 0.7;
        let raws = stream(201, 0.005, Vector3::new(0.0, 0.0, w), -DEFAULT_GRAVITY);
        let path = preintegrate(
            &raws,
            &Pose::identity(Manifold::SE3),
            Vector3::zeros(),
            &ImuCalibration::default(),
        )
        .unwrap();
        let oracle = Rotation3::from_yaw(w);
        assert_relative_eq!(
            path.terminal().0.rotation.matrix(),
            oracle.matrix(),
            epsilon = 1e-13
        );
    }

    #[test]
    fn rejects_bad_streams() {
        let cal = ImuCalibration::default();
        let id = Pose::identity(Manifold::SE3);
        assert_eq!(
            preintegrate(&[], &id, Vector3::zeros(), &cal),
            Err(PreintError::TooFewSamples(0))
        );
        let mut raws = stream(5, 0.1, Vector3::zeros(), Vector3::zeros());
        raws[3].t = raws[2].t;
        assert!(matches!(
            preintegrate(&raws, &id, Vector3::zeros(), &cal),
            Err(PreintError::NonMonotone { index: 3, .. })
        ));
    }

    #[test]
    fn sample_reference_hits_knots() {
        let raws = stream(11, 0.1, Vector3::new(0.1, 0.2, 0.3), Vector3::new(1.0, 0.0, 9.0));
        let path = preintegrate(
            &raws,
            &Pose::identity(Manifold::SE3),
            Vector3::new(0.3, 0.0, 0.0),
            &ImuCalibration::default(),
        )
        .unwrap();
        for (t, p) in path.times.iter().zip(&path.poses) {
            assert_eq!(sample_reference(&path, *t).unwrap(), *p);
        }
        assert!(sample_reference(&path, 1.5).is_err());
        assert!(sample_reference(&path, -0.1).is_err());
    }

    #[test]
    fn interpolated_corrected_samples_are_linear() {
        let s = vec![
            CorrectedImuSample {
                t: 0.0,
                omega_hat: Vector3::new(0.0, 1.0, 2.0),
                accel_hat: Vector3::zeros(),
            },
            CorrectedImuSample {
                t: 1.0,
                omega_hat: Vector3::new(1.0, 1.0, 0.0),
                accel_hat: Vector3::new(4.0, 0.0, 0.0),
            },
        ];
        let (w, a) = interpolate_corrected(&s, 0.25);
        assert_relative_eq!(w, Vector3::new(0.25, 1.0, 1.5));
        assert_relative_eq!(a, Vector3::new(1.0, 0.0, 0.0));
    }
}
