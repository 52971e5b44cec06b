//! Lie-group numerics for the three reference-signal manifolds
//! (`R3`, `SO3xR3`, `SE3`) and the 1-D multiplicative group.

mod pose;
mod scalar;
pub mod so3;

pub use pose::{geodesic_interp, Manifold, Pose, Twist};
pub use scalar::{LogScalar, PositiveScalar};
pub use so3::Rotation3;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LieError {
    #[error("manifold mismatch: expected {expected:?}, got {found:?}")]
    ManifoldMismatch { expected: Manifold, found: Manifold },
    #[error("twist has a rotational part but the base pose lives on R3")]
    RotationOnR3,
    #[error("relative rotation angle {angle} is too close to pi for a unique logarithm")]
    AmbiguousLog { angle: f64 },
    #[error("matrix is not a rotation (|R^T R - I| = {ortho:e}, |det - 1| = {det:e})")]
    NotARotation { ortho: f64, det: f64 },
    #[error("interpolation time {t} outside segment [{t_a}, {t_b}]")]
    OutsideSegment { t: f64, t_a: f64, t_b: f64 },
    #[error("degenerate segment: t_a = t_b = {0}")]
    DegenerateSegment(f64),
}

/// Elements of a tangent space: vectors with a norm and scaling.
pub trait Tangent: Clone + std::fmt::Debug + Send + Sync {
    fn norm(&self) -> f64;
    fn scaled(&self, s: f64) -> Self;
    /// Unit-norm copy. Callers guarantee a non-zero norm.
    fn unit(&self) -> Self;
}

/// The operations the event generator needs from a group.
pub trait LieGroup: Clone + std::fmt::Debug + Send + Sync {
    type Tangent: Tangent;

    /// `Log(self^-1 other)`.
    fn between(&self, other: &Self) -> Result<Self::Tangent, LieError>;

    /// `self * Exp(delta)`.
    fn retract(&self, delta: &Self::Tangent) -> Self;
}
