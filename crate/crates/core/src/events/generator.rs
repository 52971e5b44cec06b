//! Generic on-manifold level crossing.

use crate::lie::{LieGroup, Tangent};

use super::signal::ReferenceSignal;
use super::EventError;

/// Threshold and solver settings shared by every generator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LevelCrossing {
    pub theta: f64,
    /// Bisection stops once the bracket is at most this wide, in seconds,
    pub tolerance: f64,
    /// and the distance at the returned time exceeds `theta` by at most this.
    pub overshoot: f64,
    pub max_events: usize,
}

impl LevelCrossing {
    pub fn new(theta: f64) -> Self {
        Self {
            theta,
            tolerance: 1e-9,
            overshoot: 1e-10,
            max_events: 2000,
        }
    }

    pub fn validate(&self) -> Result<(), EventError> {
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(EventError::InvalidConfig(format!("theta must be > 0, got {}", self.theta)));
        }
        if !(self.tolerance > 0.0) {
            return Err(EventError::InvalidConfig(format!(
                "tolerance must be > 0, got {}",
                self.tolerance
            )));
        }
        if !(self.overshoot > 0.0) {
            return Err(EventError::InvalidConfig(format!(
                "overshoot must be > 0, got {}",
                self.overshoot
            )));
        }
        if self.max_events == 0 {
            return Err(EventError::InvalidConfig("max_events must be positive".into()));
        }
        Ok(())
    }
}

/// An event before IMU channels are attached.
#[derive(Clone, Debug, PartialEq)]
pub struct RawEvent<G: LieGroup> {
    pub tau: f64,
    /// `None` for the initial event.
    pub polarity: Option<G::Tangent>,
    pub reference: G,
}

/// Earliest time in `(lo, hi]` at which `distance` reaches `theta`, given
/// `distance(hi) = d_hi >= theta`.
///
/// Returns the right end of the final bracket. The time
/// tolerance alone is not enough under steep reparametrizations, so the
/// bracket keeps shrinking until the overshoot is also small; it only gives
/// up on that once the bracket cannot be split in floating point.
pub(crate) fn bisect_crossing<F>(
    mut lo: f64,
    mut hi: f64,
    mut d_hi: f64,
    cfg: &LevelCrossing,
    mut distance: F,
) -> Result<f64, EventError>
where
    F: FnMut(f64) -> Result<f64, EventError>,
{
    while hi - lo > cfg.tolerance || d_hi - cfg.theta > cfg.overshoot {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            if hi - lo <= cfg.tolerance {
                break;
            }
            return Err(EventError::NonConvergence { lo, hi });
        }
        let d = distance(mid)?;
        if d >= cfg.theta {
            hi = mid;
            d_hi = d;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Level crossing of `signal` against its last reference.
///
/// The first event sits at the signal start with no polarity. Each later
/// event is the earliest time (to `cfg.tolerance` and `cfg.overshoot`) at which the geodesic
/// distance to the previous reference reaches `theta`; a segment whose far
/// end is still within the ball produces no event.
pub fn generate<S: ReferenceSignal>(
    signal: &S,
    cfg: &LevelCrossing,
) -> Result<Vec<RawEvent<S::Element>>, EventError> {
    cfg.validate()?;
    let times = signal.knot_times();
    let theta = cfg.theta;
    let mut reference = signal.knot(0).clone();
    let mut events = vec![RawEvent {
        tau: times[0],
        polarity: None,
        reference: reference.clone(),
    }];

    for seg in 0..times.len() - 1 {
        let t_end = times[seg + 1];
        let far = signal.knot(seg + 1);
        let mut lo = times[seg];
        let mut cache = None;
        loop {
            let d_far = reference.between(far)?.norm();
            if !(d_far >= theta) {
                break;
            }
            if cache.is_none() {
                cache = Some(signal.prepare_segment(seg)?);
            }
            let c = cache.as_ref().unwrap();
            let tau = bisect_crossing(lo, t_end, d_far, cfg, |t| {
                let x = signal.eval_in_segment(seg, c, t);
                Ok(reference.between(&x)?.norm())
            })?;
            let next = signal.eval_in_segment(seg, c, tau);
            let step = reference.between(&next)?;
            let polarity = step.unit();
            if events.len() >= cfg.max_events {
                return Err(EventError::TooManyEvents {
                    limit: cfg.max_events,
                });
            }
            events.push(RawEvent {
                tau,
                polarity: Some(polarity),
                reference: next.clone(),
            });
            reference = next;
            lo = tau;
        }
    }
    Ok(events)
}
