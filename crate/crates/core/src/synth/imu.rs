use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::lie::{Rotation3, Twist};
use crate::preint::{CorrectedImuSample, RawImuSample, DEFAULT_GRAVITY};

use super::trajectory::SynthTrajectory;
use super::SynthError;

/// Sensor noise for synthesis plus the training-time perturbation ranges.
///
/// White-noise terms are densities (per sqrt(Hz)); drift terms are random
/// walk intensities (per sqrt(s)).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    pub gyro_noise: f64,
    pub accel_noise: f64,
    pub gyro_bias_drift: f64,
    pub accel_bias_drift: f64,
    pub gyro_bias0: [f64; 3],
    pub accel_bias0: [f64; 3],
    pub v0_range: f64,
    pub gravity_tilt_deg: f64,
    pub random_yaw: bool,
    pub omega_range: f64,
    pub accel_range: f64,
    pub polarity_range: f64,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            gyro_noise: 1e-3,
            accel_noise: 1e-2,
            gyro_bias_drift: 1e-5,
            accel_bias_drift: 1e-4,
            gyro_bias0: [0.0; 3],
            accel_bias0: [0.0; 3],
            v0_range: 0.5,
            gravity_tilt_deg: 5.0,
            random_yaw: true,
            omega_range: 0.05,
            accel_range: 0.2,
            polarity_range: 0.5,
            seed: 0,
        }
    }
}

impl NoiseSpec {
    pub fn zero() -> Self {
        Self {
            gyro_noise: 0.0,
            accel_noise: 0.0,
            gyro_bias_drift: 0.0,
            accel_bias_drift: 0.0,
            gyro_bias0: [0.0; 3],
            accel_bias0: [0.0; 3],
            v0_range: 0.0,
            gravity_tilt_deg: 0.0,
            random_yaw: false,
            omega_range: 0.0,
            accel_range: 0.0,
            polarity_range: 0.0,
            seed: 0,
        }
    }

    /// Only the sensor terms of `self`; training ranges zeroed.
    pub fn sensor_only(&self) -> Self {
        Self {
            gyro_noise: self.gyro_noise,
            accel_noise: self.accel_noise,
            gyro_bias_drift: self.gyro_bias_drift,
            accel_bias_drift: self.accel_bias_drift,
            gyro_bias0: self.gyro_bias0,
            accel_bias0: self.accel_bias0,
            seed: self.seed,
            ..Self::zero()
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let vals = [
            self.gyro_noise,
            self.accel_noise,
            self.gyro_bias_drift,
            self.accel_bias_drift,
            self.v0_range,
            self.gravity_tilt_deg,
            self.omega_range,
            self.accel_range,
            self.polarity_range,
        ];
        if vals.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(SynthError::InvalidConfig("noise ranges must be finite and non-negative".into()));
        }
        Ok(())
    }
}

fn gaussian3<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    Vector3::new(
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
    )
}

fn uniform3<R: Rng + ?Sized>(rng: &mut R, r: f64) -> Vector3<f64> {
    Vector3::new(
        rng.random_range(-r..=r),
        rng.random_range(-r..=r),
        rng.random_range(-r..=r),
    )
}

/// Raw IMU readings of `traj` at `rate` Hz with gravity `DEFAULT_GRAVITY`.
///
/// `omega = w_body + b_g + n_g`, `accel = R^T (a - g) + b_a + n_a`; the biases
/// start at `noise`'s initial values and random-walk between samples.
pub fn synthesize_imu<R: Rng + ?Sized>(
    traj: &SynthTrajectory,
    rate: f64,
    noise: &NoiseSpec,
    rng: &mut R,
) -> Result<Vec<RawImuSample>, SynthError> {
    synthesize_imu_with_gravity(traj, rate, noise, DEFAULT_GRAVITY, rng)
}

pub fn synthesize_imu_with_gravity<R: Rng + ?Sized>(
    traj: &SynthTrajectory,
    rate: f64,
    noise: &NoiseSpec,
    gravity: Vector3<f64>,
    rng: &mut R,
) -> Result<Vec<RawImuSample>, SynthError> {
    if !(rate >= 10.0) {
        return Err(SynthError::InvalidConfig(format!("IMU rate {rate} Hz below 10 Hz")));
    }
    noise.validate()?;
    let times = traj.sample_times(rate);
    if times.len() < 2 {
        return Err(SynthError::InvalidConfig("trajectory shorter than two IMU samples".into()));
    }
    let dt = 1.0 / rate;
    let (sg, sa) = (noise.gyro_noise * rate.sqrt(), noise.accel_noise * rate.sqrt());
    let (dg, da) = (noise.gyro_bias_drift * dt.sqrt(), noise.accel_bias_drift * dt.sqrt());
    let mut bg = Vector3::from(noise.gyro_bias0);
    let mut ba = Vector3::from(noise.accel_bias0);
    let mut out = Vec::with_capacity(times.len());
    for &t in &times {
        let st = traj.state(t);
        let rt = st.pose.rotation.transpose();
        let mut omega = st.omega + bg;
        let mut accel = rt.rotate(&(st.acceleration - gravity)) + ba;
        if sg > 0.0 {
            omega += gaussian3(rng) * sg;
        }
        if sa > 0.0 {
            accel += gaussian3(rng) * sa;
        }
        if dg > 0.0 {
            bg += gaussian3(rng) * dg;
        }
        if da > 0.0 {
            ba += gaussian3(rng) * da;
        }
        out.push(RawImuSample::new(t, omega, accel));
    }
    Ok(out)
}

/// The inputs of one training window that the augmentation perturbs.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingWindow {
    pub v0: Vector3<f64>,
    pub gravity_frame: Rotation3,
    pub samples: Vec<CorrectedImuSample>,
    pub polarities: Vec<Option<Twist>>,
}

/// Perturbs a window with uniform noise per `spec`.
///
/// `v0` gets a per-axis offset; the gravity frame is tilted by at most
/// `gravity_tilt_deg` about a random horizontal axis (and yawed uniformly if
/// `random_yaw`); `omega_hat`/`accel_hat` get a constant per-window offset;
/// polarities get per-component noise and are renormalized. A zero range
/// leaves its input untouched and draws nothing from `rng`.
pub fn apply_training_noise<R: Rng + ?Sized>(
    input: &TrainingWindow,
    spec: &NoiseSpec,
    rng: &mut R,
) -> Result<TrainingWindow, SynthError> {
    spec.validate()?;
    let mut out = input.clone();
    if spec.v0_range > 0.0 {
        out.v0 += uniform3(rng, spec.v0_range);
    }
    if spec.gravity_tilt_deg > 0.0 {
        let axis_angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let tilt = rng.random_range(0.0..=spec.gravity_tilt_deg.to_radians());
        let axis = Vector3::new(axis_angle.cos(), axis_angle.sin(), 0.0);
        out.gravity_frame = Rotation3::exp(&(axis * tilt)).compose(&out.gravity_frame);
    }
    if spec.random_yaw {
        let yaw = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        out.gravity_frame = Rotation3::from_yaw(yaw).compose(&out.gravity_frame);
    }
    if spec.omega_range > 0.0 {
        let n = uniform3(rng, spec.omega_range);
        out.samples.iter_mut().for_each(|s| s.omega_hat += n);
    }
    if spec.accel_range > 0.0 {
        let n = uniform3(rng, spec.accel_range);
        out.samples.iter_mut().for_each(|s| s.accel_hat += n);
    }
    if spec.polarity_range > 0.0 {
        let r = spec.polarity_range;
        for p in out.polarities.iter_mut().flatten() {
            let mut a = p.to_array();
            for v in &mut a {
                *v += rng.random_range(-r..=r);
            }
            if let Some(u) = Twist::from_array(a).normalized() {
                *p = u;
            }
        }
    }
    Ok(out)
}
