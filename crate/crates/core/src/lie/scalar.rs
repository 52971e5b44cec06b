use super::{LieError, LieGroup, Tangent};

/// Element of the multiplicative group of positive reals, stored by its
/// logarithm so that products are exact additions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PositiveScalar {
    log: f64,
}

/// Tangent of [`PositiveScalar`]: a real log-ratio.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogScalar(pub f64);

impl PositiveScalar {
    /// `None` unless `x` is positive and finite.
    pub fn new(x: f64) -> Option<Self> {
        (x > 0.0 && x.is_finite()).then(|| Self { log: x.ln() })
    }

    pub fn from_log(log: f64) -> Self {
        Self { log }
    }

    pub fn log(&self) -> f64 {
        self.log
    }

    pub fn value(&self) -> f64 {
        self.log.exp()
    }
}

impl Tangent for LogScalar {
    #[inline]
    fn norm(&self) -> f64 {
        self.0.abs()
    }
    #[inline]
    fn scaled(&self, s: f64) -> Self {
        LogScalar(s * self.0)
    }
    #[inline]
    fn unit(&self) -> Self {
        LogScalar(self.0.signum())
    }
}

impl LieGroup for PositiveScalar {
    type Tangent = LogScalar;

    #[inline]
    fn between(&self, other: &Self) -> Result<LogScalar, LieError> {
        Ok(LogScalar(other.log - self.log))
    }

    #[inline]
    fn retract(&self, delta: &LogScalar) -> Self {
        Self {
            log: self.log + delta.0,
        }
    }
}
