//! Lie events: level-crossing sampling of the pre-integrated reference signal.
//!
//! [`generate`] is the group-generic state machine. [`generate_events`]
//! runs it on a pre-integration path for one of the three pose manifolds and
//! attaches the interpolated corrected IMU channels, and
//! [`generate_events_scalar`] is the 1-D log-intensity special case.

mod generator;
mod signal;

pub use generator::{generate, LevelCrossing, RawEvent};
pub use signal::{PiecewiseGeodesic, ReferenceSignal, TimeMap, TimeWarped};

use nalgebra::Vector3;
use thiserror::Error;

use crate::lie::{LieError, Manifold, Pose, Rotation3, Twist};
use crate::preint::{interpolate_corrected, CorrectedImuSample, PreintegrationPath};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EventError {
    #[error("reference signal must cover a non-empty interval with at least two knots")]
    EmptySignal,
    #[error("knot times not strictly increasing at index {index}")]
    NonMonotone { index: usize },
    #[error("more than {limit} events in one window; theta is too small for this motion")]
    TooManyEvents { limit: usize },
    #[error("crossing solver stalled in [{lo}, {hi}]; tolerance below time resolution")]
    NonConvergence { lo: f64, hi: f64 },
    #[error("scalar signal sample {index} is not positive ({value})")]
    NonPositiveSample { index: usize, value: f64 },
    #[error("time {t} outside the reference signal")]
    OutsideSignal { t: f64 },
    #[error(
        "reconstruction deviates by {deviation:e} at event {index}; \
         events were generated with a different theta"
    )]
    ThetaMismatch { index: usize, deviation: f64 },
    #[error("invalid event configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Lie(#[from] LieError),
}

/// Generator settings for pose reference signals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EventGenConfig {
    pub theta: f64,
    pub manifold: Manifold,
    pub tolerance: f64,
    pub max_events: usize,
}

impl Default for EventGenConfig {
    fn default() -> Self {
        Self {
            theta: 0.01,
            manifold: Manifold::SE3,
            tolerance: 1e-9,
            max_events: 10 * crate::stack::DEFAULT_BINS,
        }
    }
}

impl EventGenConfig {
    pub fn new(theta: f64, manifold: Manifold) -> Self {
        Self {
            theta,
            manifold,
            ..Self::default()
        }
    }

    pub fn crossing(&self) -> LevelCrossing {
        LevelCrossing {
            tolerance: self.tolerance,
            max_events: self.max_events,
            ..LevelCrossing::new(self.theta)
        }
    }
}

/// A Lie event with its interpolated, corrected IMU channels.
#[derive(Clone, Debug, PartialEq)]
pub struct LieEvent {
    pub tau: f64,
    /// Unit twist; `None` for the initial event of a window.
    pub polarity: Option<Twist>,
    pub reference: Pose,
    pub omega_hat: Vector3<f64>,
    pub accel_hat: Vector3<f64>,
}

/// Builds the piecewise-geodesic reference of `path` on `manifold`.
pub fn reference_signal(
    path: &PreintegrationPath,
    manifold: Manifold,
) -> Result<PiecewiseGeodesic<Pose>, EventError> {
    PiecewiseGeodesic::new(path.times.clone(), path.poses_on(manifold))
}

/// Events of a pre-integration path with `omega_hat`/`accel_hat` linearly
/// interpolated from `corrected` at each event time.
pub fn generate_events(
    path: &PreintegrationPath,
    corrected: &[CorrectedImuSample],
    cfg: &EventGenConfig,
) -> Result<Vec<LieEvent>, EventError> {
    let signal = reference_signal(path, cfg.manifold)?;
    let raw = generate(&signal, &cfg.crossing())?;
    Ok(attach_imu(raw, corrected))
}

pub fn attach_imu(raw: Vec<RawEvent<Pose>>, corrected: &[CorrectedImuSample]) -> Vec<LieEvent> {
    raw.into_iter()
        .map(|e| {
            let (omega_hat, accel_hat) = interpolate_corrected(corrected, e.tau);
            LieEvent {
                tau: e.tau,
                polarity: e.polarity,
                reference: e.reference,
                omega_hat,
                accel_hat,
            }
        })
        .collect()
}

/// A 1-D event; the reference is kept as a log value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalarEvent {
    pub tau: f64,
    /// `+1` or `-1`; `None` for the initial event.
    pub polarity: Option<f64>,
    pub log_reference: f64,
}

/// Level crossing on `log x(t)` of a positive, piecewise-linear-in-log signal.
pub fn generate_events_scalar(
    signal: &[(f64, f64)],
    cfg: &LevelCrossing,
) -> Result<Vec<ScalarEvent>, EventError> {
    cfg.validate()?;
    for (index, &(_, x)) in signal.iter().enumerate() {
        if !(x > 0.0 && x.is_finite()) {
            return Err(EventError::NonPositiveSample { index, value: x });
        }
    }
    let times: Vec<f64> = signal.iter().map(|s| s.0).collect();
    signal::check_knots(&times)?;
    let logs: Vec<f64> = signal.iter().map(|s| s.1.ln()).collect();
    let theta = cfg.theta;

    let mut l_ref = logs[0];
    let mut events = vec![ScalarEvent {
        tau: times[0],
        polarity: None,
        log_reference: l_ref,
    }];
    for i in 0..times.len() - 1 {
        let (t0, t1) = (times[i], times[i + 1]);
        let (l0, l1) = (logs[i], logs[i + 1]);
        let slope = l1 - l0;
        let eval = |t: f64| {
            if t == t0 {
                l0
            } else if t == t1 {
                l1
            } else {
                l0 + ((t - t0) / (t1 - t0)) * slope
            }
        };
        let mut lo = t0;
        loop {
            if !((l1 - l_ref).abs() >= theta) {
                break;
            }
            let current = l_ref;
            let tau = generator::bisect_crossing(lo, t1, (l1 - current).abs(), cfg, |t| {
                Ok((eval(t) - current).abs())
            })?;
            let l_new = eval(tau);
            if events.len() >= cfg.max_events {
                return Err(EventError::TooManyEvents {
                    limit: cfg.max_events,
                });
            }
            events.push(ScalarEvent {
                tau,
                polarity: Some(if l_new - l_ref > 0.0 { 1.0 } else { -1.0 }),
                log_reference: l_new,
            });
            l_ref = l_new;
            lo = tau;
        }
    }
    Ok(events)
}

/// Default per-step bound used by [`reconstruct_references`].
pub const RECONSTRUCTION_TOLERANCE: f64 = 1e-6;

/// Rebuilds references via `x_j = x_{j-1} Exp(theta p_j)` starting at `x0`.
///
/// Every rebuilt reference is checked against the one recorded in the
/// event; a deviation above [`RECONSTRUCTION_TOLERANCE`] means `theta` does
/// not match the generator's.
pub fn reconstruct_references(
    events: &[LieEvent],
    theta: f64,
    x0: &Pose,
) -> Result<Vec<Pose>, EventError> {
    reconstruct_references_with_tolerance(events, theta, x0, RECONSTRUCTION_TOLERANCE)
}

pub fn reconstruct_references_with_tolerance(
    events: &[LieEvent],
    theta: f64,
    x0: &Pose,
    tolerance: f64,
) -> Result<Vec<Pose>, EventError> {
    let mut out = vec![*x0];
    let mut current = *x0;
    let mut prev_recorded: Option<Pose> = None;
    for (index, e) in events.iter().enumerate() {
        let Some(p) = &e.polarity else {
            prev_recorded = Some(e.reference);
            continue;
        };
        let step = p.scaled(theta);
        // The bound is per step: compare against the recorded predecessor so
        // that bisection slack does not accumulate.
        if let Some(prev) = prev_recorded {
            let deviation = prev.exp_map(&step)?.log_map(&e.reference)?.norm();
            if deviation > tolerance {
                return Err(EventError::ThetaMismatch { index, deviation });
            }
        }
        current = current.exp_map(&step)?;
        prev_recorded = Some(e.reference);
        out.push(current);
    }
    Ok(out)
}

/// Rotates both blocks of a polarity into `frame`.
pub fn gravity_align_polarity(p: &Twist, frame: &Rotation3) -> Twist {
    Twist::new(frame.rotate(&p.rot), frame.rotate(&p.trans))
}
