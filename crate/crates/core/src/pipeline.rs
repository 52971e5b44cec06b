//! One window of raw IMU data to gravity-aligned Lie events and a stack.

use nalgebra::Vector3;
use thiserror::Error;

use crate::events::{attach_imu, generate, gravity_align_polarity, reference_signal, EventError, EventGenConfig, LieEvent};
use crate::lie::{Manifold, Pose, Rotation3, Twist};
use crate::preint::{preintegrate, CorrectedImuSample, ImuCalibration, PreintError, PreintegrationPath, RawImuSample};
use crate::stack::{build_stack, EventStack};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Preint(#[from] PreintError),
    #[error(transparent)]
    Event(#[from] EventError),
}

#[derive(Clone, Debug)]
pub struct WindowEvents {
    pub path: PreintegrationPath,
    /// Channels in the gravity-aligned frame of each sample.
    pub corrected: Vec<CorrectedImuSample>,
    pub events: Vec<LieEvent>,
}

impl WindowEvents {
    pub fn stack(&self, bins: usize) -> EventStack {
        build_stack(&self.events, bins)
    }
}

/// Expresses the body-frame blocks of a polarity in the gravity-aligned frame
/// of the previous reference. Blocks that are already world-frame differences
/// are left alone.
pub fn align_polarity(p: &Twist, prev_reference: &Pose) -> Twist {
    let r = &prev_reference.rotation;
    match prev_reference.manifold {
        Manifold::SE3 => gravity_align_polarity(p, r),
        Manifold::SO3xR3 => Twist::new(r.rotate(&p.rot), p.trans),
        Manifold::R3 => *p,
    }
}

/// Pre-integrates `raws` from `(init_rotation, 0)` and `v0`, generates events
/// and rotates channels and polarities into gravity-aligned frames:
/// `w_hat_i = R_i (w_i - b_g)`, `a_hat_i = R_i (a_i - b_a) + g`, with `R_i` the
/// pre-integrated rotation at sample `i`.
pub fn window_events(
    raws: &[RawImuSample],
    init_rotation: Rotation3,
    v0: Vector3<f64>,
    calib: &ImuCalibration,
    cfg: &EventGenConfig,
) -> Result<WindowEvents, PipelineError> {
    let path = preintegrate(raws, &Pose::se3(init_rotation, Vector3::zeros()), v0, calib)?;
    let corrected: Vec<CorrectedImuSample> = raws
        .iter()
        .zip(&path.poses)
        .map(|(r, p)| CorrectedImuSample {
            t: r.t,
            omega_hat: p.rotation.rotate(&(r.omega - calib.bias_gyro)),
            accel_hat: p.rotation.rotate(&(r.accel - calib.bias_accel)) + calib.gravity,
        })
        .collect();
    let signal = reference_signal(&path, cfg.manifold)?;
    let mut raw = generate(&signal, &cfg.crossing())?;
    for k in (1..raw.len()).rev() {
        let prev = raw[k - 1].reference;
        if let Some(p) = raw[k].polarity.as_mut() {
            *p = align_polarity(p, &prev);
        }
    }
    let events = attach_imu(raw, &corrected);
    Ok(WindowEvents { path, corrected, events })
}

/// Start index of each window of length `window` seconds over `raws`, stepping
/// by `window` and keeping only windows fully covered by samples.
pub fn window_starts(raws: &[RawImuSample], window: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    if raws.len() < 2 || !(window > 0.0) {
        return out;
    }
    let t0 = raws[0].t;
    let end = raws[raws.len() - 1].t;
    let mut k = 0usize;
    loop {
        let a = t0 + k as f64 * window;
        let b = a + window;
        if b > end + 1e-9 {
            break;
        }
        let i = raws.partition_point(|r| r.t < a - 1e-9);
        let j = raws.partition_point(|r| r.t <= b + 1e-9);
        if j > i + 1 {
            out.push((i, j));
        }
        k += 1;
    }
    out
}
