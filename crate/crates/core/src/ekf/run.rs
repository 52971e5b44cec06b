use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::events::EventGenConfig;
use crate::lie::Rotation3;
use crate::pipeline::{window_events, PipelineError};
use crate::preint::{ImuCalibration, RawImuSample, DEFAULT_GRAVITY};
use crate::stack::{build_stack, DEFAULT_BINS};
use crate::traj::{Trajectory, TrajectorySample};

use super::{DisplacementPrior, EkfError, FilterState, Matrix15, NavState, NoiseParams, PriorInput};

/// Initial standard deviations of the current state; the clone blocks start empty.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitialCovariance {
    pub rotation: f64,
    pub velocity: f64,
    pub position: f64,
    pub bias_gyro: f64,
    pub bias_accel: f64,
}

impl Default for InitialCovariance {
    fn default() -> Self {
        Self {
            rotation: 1e-3,
            velocity: 1e-2,
            position: 1e-3,
            bias_gyro: 1e-3,
            bias_accel: 1e-2,
        }
    }
}

impl InitialCovariance {
    pub fn matrix(&self) -> Matrix15 {
        let s = [self.rotation, self.velocity, self.position, self.bias_gyro, self.bias_accel];
        let mut p = Matrix15::zeros();
        for (b, v) in s.iter().enumerate() {
            for k in 0..3 {
                p[(3 * b + k, 3 * b + k)] = v * v;
            }
        }
        p
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterConfig {
    pub update_rate: f64,
    /// Length of the displacement window in seconds.
    pub window: f64,
    pub noise: NoiseParams,
    pub initial: InitialCovariance,
    pub events: EventGenConfig,
    pub bins: usize,
    pub gravity: Vector3<f64>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            update_rate: 20.0,
            window: 1.0,
            noise: NoiseParams::default(),
            initial: InitialCovariance::default(),
            events: EventGenConfig::default(),
            bins: DEFAULT_BINS,
            gravity: DEFAULT_GRAVITY,
        }
    }
}

impl FilterConfig {
    /// Clones spanning one window at the update rate.
    pub fn clone_budget(&self) -> usize {
        ((self.window * self.update_rate).round() as usize).max(1)
    }

    pub fn validate(&self) -> Result<(), EkfError> {
        if !(self.update_rate > 0.0 && self.update_rate.is_finite()) {
            return Err(EkfError::InvalidConfig(format!("update rate must be > 0, got {}", self.update_rate)));
        }
        if !(self.window > 0.0 && self.window.is_finite()) {
            return Err(EkfError::InvalidConfig(format!("window must be > 0, got {}", self.window)));
        }
        if self.bins == 0 {
            return Err(EkfError::InvalidConfig("bins must be positive".into()));
        }
        self.noise.validate()?;
        self.events.crossing().validate()?;
        Ok(())
    }
}

/// Raw samples covering `[t0, t1]` under zero-order hold: the sample active at
/// `t0` is re-stamped to `t0`, and one sample is appended at `t1`.
pub fn window_samples(stream: &[RawImuSample], t0: f64, t1: f64) -> Vec<RawImuSample> {
    if stream.is_empty() || t1 <= t0 {
        return Vec::new();
    }
    let first = stream.partition_point(|s| s.t <= t0).saturating_sub(1);
    let mut out = vec![RawImuSample { t: t0, ..stream[first] }];
    let mut last = stream[first];
    for s in &stream[first + 1..] {
        if s.t >= t1 {
            break;
        }
        out.push(*s);
        last = *s;
    }
    out.push(RawImuSample { t: t1, ..last });
    out
}

fn sample_of(st: &FilterState) -> TrajectorySample {
    TrajectorySample {
        t: st.t,
        rotation: st.current.rotation,
        position: st.current.position,
        velocity: st.current.velocity,
        bias_gyro: st.current.bias_gyro,
        bias_accel: st.current.bias_accel,
    }
}

/// Runs the filter over `stream`, emitting one estimate per IMU sample.
///
/// Every `1 / update_rate` seconds a clone is taken; once a clone one window
/// old exists, the prior is queried for the displacement since that clone and
/// the update is applied against it. Without a prior this is plain strap-down
/// integration.
pub fn run_filter(
    stream: &[RawImuSample],
    init: &TrajectorySample,
    mut prior: Option<&mut dyn DisplacementPrior>,
    cfg: &FilterConfig,
) -> Result<Trajectory, EkfError> {
    cfg.validate()?;
    if stream.len() < 2 {
        return Err(EkfError::InvalidConfig(format!("stream needs at least 2 samples, got {}", stream.len())));
    }
    let t0 = stream[0].t;
    let nav = NavState {
        rotation: init.rotation,
        velocity: init.velocity,
        position: init.position,
        bias_gyro: init.bias_gyro,
        bias_accel: init.bias_accel,
    };
    let mut st = FilterState::new(t0, nav, &cfg.initial.matrix(), cfg.gravity, cfg.clone_budget());
    st.propagate(&stream[0], &cfg.noise)?;
    st.augment_clone(t0, &cfg.noise)?;

    let mut out = Vec::with_capacity(stream.len());
    out.push(sample_of(&st));
    let period = 1.0 / cfg.update_rate;
    let mut k = 1u64;
    for raw in &stream[1..] {
        loop {
            let tu = t0 + k as f64 * period;
            if tu > raw.t {
                break;
            }
            st.propagate_to(tu, &cfg.noise)?;
            if let Some(p) = prior.as_deref_mut() {
                update_at(&mut st, stream, p, cfg)?;
            }
            st.augment_clone(tu, &cfg.noise)?;
            k += 1;
        }
        st.propagate(raw, &cfg.noise)?;
        out.push(sample_of(&st));
    }
    Ok(Trajectory::new(out))
}

fn update_at(
    st: &mut FilterState,
    stream: &[RawImuSample],
    prior: &mut dyn DisplacementPrior,
    cfg: &FilterConfig,
) -> Result<(), EkfError> {
    if st.clones.len() < st.clone_budget {
        return Ok(());
    }
    let cl = st.clones[0];
    if (st.t - cl.t - cfg.window).abs() > 1e-6 {
        return Ok(());
    }
    let raws;
    let events;
    let stack;
    let (ev_slice, stack_ref) = if prior.needs_events() {
        raws = window_samples(stream, cl.t, st.t);
        let rg_t = Rotation3::from_yaw(cl.rotation.yaw()).transpose();
        let calib = ImuCalibration {
            bias_gyro: st.current.bias_gyro,
            bias_accel: st.current.bias_accel,
            gravity: cfg.gravity,
            gravity_frame: Rotation3::identity(),
        };
        let w = window_events(&raws, rg_t.compose(&cl.rotation), rg_t.rotate(&cl.velocity), &calib, &cfg.events)
            .map_err(|e| match e {
                PipelineError::Preint(e) => EkfError::Preint(e),
                PipelineError::Event(e) => EkfError::Event(e),
            })?;
        events = w.events;
        stack = build_stack(&events, cfg.bins);
        (&events[..], Some(&stack))
    } else {
        (&[][..], None)
    };
    let meas = prior.predict(&PriorInput {
        t_start: cl.t,
        t_end: st.t,
        clone_rotation: cl.rotation,
        events: ev_slice,
        stack: stack_ref,
    })?;
    st.measurement_update(0, &meas)?;
    Ok(())
}
