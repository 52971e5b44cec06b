//! Synthetic trajectories, IMU synthesis, training-noise augmentation and
//! the time-reparametrization toy experiment.

mod chamfer;
mod imu;
mod spline;
mod toy;
mod trajectory;

pub use chamfer::chamfer_distance;
pub use imu::{apply_training_noise, synthesize_imu, synthesize_imu_with_gravity, NoiseSpec, TrainingWindow};
pub use spline::{body_rate_from_euler, CubicSpline, PoseSpline, SplineSample};
pub use toy::{run_toy_experiment, toy_windows, ToyConfig, ToyReference, ToyRow};
pub use trajectory::{random_walk, KinematicState, Reparametrization, SynthTrajectory, WalkConfig, WindowMap};

use thiserror::Error;

use crate::events::EventError;
use crate::lie::LieError;
use crate::preint::PreintError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("timestamp set is empty")]
    EmptySet,
    #[error("{0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Preint(#[from] PreintError),
    #[error(transparent)]
    Event(#[from] EventError),
    #[error(transparent)]
    Lie(#[from] LieError),
}

/// A synthetic walk sampled as a raw IMU stream plus ground truth on the
/// same timestamps. `noisy` adds the default sensor noise and a small
/// constant turn-on bias.
pub fn walk_dataset(
    seed: u64,
    duration: f64,
    rate: f64,
    noisy: bool,
) -> Result<(Vec<crate::preint::RawImuSample>, crate::traj::Trajectory), SynthError> {
    use crate::traj::{Trajectory, TrajectorySample};
    use rand::SeedableRng;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let walk = random_walk(&mut rng, &WalkConfig { duration, ..WalkConfig::default() })?;
    let noise = if noisy {
        NoiseSpec {
            gyro_bias0: [0.002, -0.001, 0.0015],
            accel_bias0: [0.02, -0.01, 0.015],
            ..NoiseSpec::default().sensor_only()
        }
    } else {
        NoiseSpec::zero()
    };
    let raws = synthesize_imu(&walk, rate, &noise, &mut rng)?;
    let truth = raws
        .iter()
        .map(|r| {
            let s = walk.state(r.t);
            TrajectorySample::new(r.t, s.pose.rotation, s.pose.translation, s.velocity)
        })
        .collect();
    Ok((raws, Trajectory::new(truth)))
}
