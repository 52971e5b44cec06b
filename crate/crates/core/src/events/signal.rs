//! Continuous reference signals sampled by the level-crossing generator.

use crate::lie::{LieError, LieGroup, Tangent};

use super::EventError;

/// A continuous group-valued signal with knots at which the generator
/// checks for threshold crossings.
pub trait ReferenceSignal: Sync {
    type Element: LieGroup;
    /// Per-segment state computed once before evaluating inside a segment.
    type SegmentCache;

    fn knot_times(&self) -> &[f64];
    fn knot(&self, i: usize) -> &Self::Element;
    fn prepare_segment(&self, seg: usize) -> Result<Self::SegmentCache, LieError>;
    /// Signal value at `t` in `[t_seg, t_seg+1]`.
    fn eval_in_segment(&self, seg: usize, cache: &Self::SegmentCache, t: f64) -> Self::Element;

    fn start(&self) -> f64 {
        self.knot_times()[0]
    }

    fn end(&self) -> f64 {
        let k = self.knot_times();
        k[k.len() - 1]
    }
}

pub(crate) fn check_knots(times: &[f64]) -> Result<(), EventError> {
    if times.len() < 2 {
        return Err(EventError::EmptySignal);
    }
    for i in 1..times.len() {
        if !(times[i] > times[i - 1]) {
            return Err(EventError::NonMonotone { index: i });
        }
    }
    Ok(())
}

/// Knots joined by geodesics: `x(t) = x_i Exp(s Log(x_i^-1 x_{i+1}))`.
#[derive(Clone, Debug)]
pub struct PiecewiseGeodesic<G> {
    times: Vec<f64>,
    knots: Vec<G>,
}

impl<G: LieGroup> PiecewiseGeodesic<G> {
    pub fn new(times: Vec<f64>, knots: Vec<G>) -> Result<Self, EventError> {
        assert_eq!(times.len(), knots.len(), "one knot per timestamp");
        check_knots(&times)?;
        Ok(Self { times, knots })
    }

    pub fn knots(&self) -> &[G] {
        &self.knots
    }

    /// Segment index containing `t` (the last segment owns its right end).
    pub fn segment_of(&self, t: f64) -> Option<usize> {
        if t < self.times[0] || t > self.times[self.times.len() - 1] {
            return None;
        }
        let k = self.times.partition_point(|&ti| ti <= t);
        Some(k.saturating_sub(1).min(self.times.len() - 2))
    }

    /// Evaluates the signal anywhere in its domain.
    pub fn eval(&self, t: f64) -> Result<G, EventError> {
        let seg = self
            .segment_of(t)
            .ok_or(EventError::OutsideSignal { t })?;
        let cache = self.prepare_segment(seg)?;
        Ok(self.eval_in_segment(seg, &cache, t))
    }
}

impl<G: LieGroup> ReferenceSignal for PiecewiseGeodesic<G> {
    type Element = G;
    type SegmentCache = G::Tangent;

    #[inline]
    fn knot_times(&self) -> &[f64] {
        &self.times
    }

    #[inline]
    fn knot(&self, i: usize) -> &G {
        &self.knots[i]
    }

    #[inline]
    fn prepare_segment(&self, seg: usize) -> Result<G::Tangent, LieError> {
        self.knots[seg].between(&self.knots[seg + 1])
    }

    #[inline]
    fn eval_in_segment(&self, seg: usize, delta: &G::Tangent, t: f64) -> G {
        let (t0, t1) = (self.times[seg], self.times[seg + 1]);
        if t == t0 {
            return self.knots[seg].clone();
        }
        if t == t1 {
            return self.knots[seg + 1].clone();
        }
        let s = (t - t0) / (t1 - t0);
        self.knots[seg].retract(&delta.scaled(s))
    }
}

/// A strictly increasing time map `phi` with its inverse.
pub trait TimeMap: Sync {
    fn apply(&self, t: f64) -> f64;
    fn inverse(&self, s: f64) -> f64;
}

/// The trajectory `x(t) = x*(phi(t))` of a path signal `x*`.
///
/// Knots sit at `phi^-1` of the path's knots, so every segment of the
/// warped signal maps onto exactly one segment of the path.
pub struct TimeWarped<'a, S, M> {
    inner: &'a S,
    map: &'a M,
    times: Vec<f64>,
}

impl<'a, S: ReferenceSignal, M: TimeMap> TimeWarped<'a, S, M> {
    pub fn new(inner: &'a S, map: &'a M) -> Result<Self, EventError> {
        let times: Vec<f64> = inner.knot_times().iter().map(|&s| map.inverse(s)).collect();
        check_knots(&times)?;
        Ok(Self { inner, map, times })
    }
}

impl<S: ReferenceSignal, M: TimeMap> ReferenceSignal for TimeWarped<'_, S, M> {
    type Element = S::Element;
    type SegmentCache = S::SegmentCache;

    fn knot_times(&self) -> &[f64] {
        &self.times
    }

    fn knot(&self, i: usize) -> &S::Element {
        self.inner.knot(i)
    }

    fn prepare_segment(&self, seg: usize) -> Result<S::SegmentCache, LieError> {
        self.inner.prepare_segment(seg)
    }

    fn eval_in_segment(&self, seg: usize, cache: &S::SegmentCache, t: f64) -> S::Element {
        if t == self.times[seg] {
            return self.inner.knot(seg).clone();
        }
        if t == self.times[seg + 1] {
            return self.inner.knot(seg + 1).clone();
        }
        let inner_t = self.inner.knot_times();
        let s = self.map.apply(t).clamp(inner_t[seg], inner_t[seg + 1]);
        self.inner.eval_in_segment(seg, cache, s)
    }
}
