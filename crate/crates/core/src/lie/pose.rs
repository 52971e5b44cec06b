use nalgebra::{Vector3, Vector6};
use serde::{Deserialize, Serialize};

use super::so3::{self, Rotation3};
use super::{LieError, LieGroup, Tangent};

/// Which group structure a [`Pose`] follows.
///
/// `SO3xR3` is the direct product (translation composes additively in the
/// world frame), `SE3` the semidirect product.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Manifold {
    R3,
    SO3xR3,
    SE3,
}

impl std::str::FromStr for Manifold {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "r3" => Ok(Manifold::R3),
            "so3xr3" => Ok(Manifold::SO3xR3),
            "se3" => Ok(Manifold::SE3),
            other => Err(format!("unknown manifold '{other}' (expected r3, so3xr3, se3)")),
        }
    }
}

/// Tangent vector ordered `[rotation; translation]`.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Twist {
    pub rot: Vector3<f64>,
    pub trans: Vector3<f64>,
}

impl Twist {
    pub fn new(rot: Vector3<f64>, trans: Vector3<f64>) -> Self {
        Self { rot, trans }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self {
            rot: Vector3::new(a[0], a[1], a[2]),
            trans: Vector3::new(a[3], a[4], a[5]),
        }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.rot.x,
            self.rot.y,
            self.rot.z,
            self.trans.x,
            self.trans.y,
            self.trans.z,
        ]
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::from_row_slice(&self.to_array())
    }

    pub fn norm(&self) -> f64 {
        (self.rot.norm_squared() + self.trans.norm_squared()).sqrt()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            rot: self.rot * s,
            trans: self.trans * s,
        }
    }

    /// Unit-norm copy; `None` for the zero twist.
    pub fn normalized(&self) -> Option<Self> {
        let n = self.norm();
        (n > 0.0).then(|| Twist::new(self.rot / n, self.trans / n))
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }
}

impl std::ops::Add for Twist {
    type Output = Twist;
    fn add(self, rhs: Twist) -> Twist {
        Twist::new(self.rot + rhs.rot, self.trans + rhs.trans)
    }
}

impl std::ops::Sub for Twist {
    type Output = Twist;
    fn sub(self, rhs: Twist) -> Twist {
        Twist::new(self.rot - rhs.rot, self.trans - rhs.trans)
    }
}

impl Tangent for Twist {
    #[inline]
    fn norm(&self) -> f64 {
        Twist::norm(self)
    }
    #[inline]
    fn scaled(&self, s: f64) -> Self {
        Twist::scaled(self, s)
    }
    #[inline]
    fn unit(&self) -> Self {
        let n = Twist::norm(self);
        Twist::new(self.rot / n, self.trans / n)
    }
}

/// A rigid pose tagged with the group structure it composes under.
///
/// For [`Manifold::R3`] the rotation is ignored and kept at the identity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub manifold: Manifold,
    pub rotation: Rotation3,
    pub translation: Vector3<f64>,
}

impl Pose {
    pub fn identity(manifold: Manifold) -> Self {
        Self {
            manifold,
            rotation: Rotation3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(manifold: Manifold, rotation: Rotation3, translation: Vector3<f64>) -> Self {
        let rotation = match manifold {
            Manifold::R3 => Rotation3::identity(),
            _ => rotation,
        };
        Self {
            manifold,
            rotation,
            translation,
        }
    }

    pub fn se3(rotation: Rotation3, translation: Vector3<f64>) -> Self {
        Self::new(Manifold::SE3, rotation, translation)
    }

    /// Re-tags the same physical pose; projecting to `R3` drops the rotation.
    pub fn with_manifold(&self, manifold: Manifold) -> Self {
        Self::new(manifold, self.rotation, self.translation)
    }

    fn check(&self, other: Manifold) -> Result<(), LieError> {
        if self.manifold != other {
            return Err(LieError::ManifoldMismatch {
                expected: self.manifold,
                found: other,
            });
        }
        Ok(())
    }

    /// Group product `self * other`.
    pub fn compose(&self, other: &Pose) -> Result<Pose, LieError> {
        self.check(other.manifold)?;
        Ok(self.compose_unchecked(other))
    }

    fn compose_unchecked(&self, other: &Pose) -> Pose {
        match self.manifold {
            Manifold::R3 => Pose {
                translation: self.translation + other.translation,
                ..*self
            },
            Manifold::SO3xR3 => Pose {
                manifold: self.manifold,
                rotation: self.rotation.compose(&other.rotation),
                translation: self.translation + other.translation,
            },
            Manifold::SE3 => Pose {
                manifold: self.manifold,
                rotation: self.rotation.compose(&other.rotation),
                translation: self.translation + self.rotation.rotate(&other.translation),
            },
        }
    }

    pub fn inverse(&self) -> Pose {
        match self.manifold {
            Manifold::R3 => Pose {
                translation: -self.translation,
                ..*self
            },
            Manifold::SO3xR3 => Pose {
                manifold: self.manifold,
                rotation: self.rotation.inverse(),
                translation: -self.translation,
            },
            Manifold::SE3 => {
                let rt = self.rotation.inverse();
                Pose {
                    manifold: self.manifold,
                    rotation: rt,
                    translation: -rt.rotate(&self.translation),
                }
            }
        }
    }

    /// Group exponential of `xi` on `manifold`.
    pub fn exp(manifold: Manifold, xi: &Twist) -> Pose {
        match manifold {
            Manifold::R3 => Pose {
                manifold,
                rotation: Rotation3::identity(),
                translation: xi.trans,
            },
            Manifold::SO3xR3 => Pose {
                manifold,
                rotation: Rotation3::exp(&xi.rot),
                translation: xi.trans,
            },
            Manifold::SE3 => {
                let (e, v, _) = so3::exp_and_jacobians_with(&xi.rot, so3::SeriesBranch::Auto);
                Pose {
                    manifold,
                    rotation: Rotation3::from_matrix_unchecked(e),
                    translation: v * xi.trans,
                }
            }
        }
    }

    /// Group logarithm of `self`.
    pub fn log(&self) -> Result<Twist, LieError> {
        match self.manifold {
            Manifold::R3 => Ok(Twist::new(Vector3::zeros(), self.translation)),
            Manifold::SO3xR3 => Ok(Twist::new(self.rotation.log()?, self.translation)),
            Manifold::SE3 => {
                let w = self.rotation.log()?;
                Ok(Twist::new(w, so3::left_jacobian_inv(&w) * self.translation))
            }
        }
    }

    /// `base * Exp(xi)`.
    pub fn exp_map(&self, xi: &Twist) -> Result<Pose, LieError> {
        if self.manifold == Manifold::R3 && xi.rot != Vector3::zeros() {
            return Err(LieError::RotationOnR3);
        }
        Ok(self.compose_unchecked(&Pose::exp(self.manifold, xi)))
    }

    /// `Log(self^-1 * target)`.
    pub fn log_map(&self, target: &Pose) -> Result<Twist, LieError> {
        self.check(target.manifold)?;
        self.between_unchecked(target)
    }

    #[inline]
    fn between_unchecked(&self, target: &Pose) -> Result<Twist, LieError> {
        match self.manifold {
            Manifold::R3 => Ok(Twist::new(
                Vector3::zeros(),
                target.translation - self.translation,
            )),
            Manifold::SO3xR3 => Ok(Twist::new(
                self.rotation.inverse().compose(&target.rotation).log()?,
                target.translation - self.translation,
            )),
            Manifold::SE3 => self.inverse().compose_unchecked(target).log(),
        }
    }

    /// Element-wise distance on the 12 matrix/vector entries; for tests and diagnostics.
    pub fn max_abs_diff(&self, other: &Pose) -> f64 {
        let r = (self.rotation.matrix() - other.rotation.matrix()).abs().max();
        let t = (self.translation - other.translation).abs().max();
        r.max(t)
    }
}

impl LieGroup for Pose {
    type Tangent = Twist;

    #[inline]
    fn between(&self, other: &Self) -> Result<Twist, LieError> {
        self.log_map(other)
    }

    #[inline]
    fn retract(&self, delta: &Twist) -> Self {
        self.compose_unchecked(&Pose::exp(self.manifold, delta))
    }
}

/// Point at time `t` on the geodesic from `a` (at `t_a`) to `b` (at `t_b`).
pub fn geodesic_interp(a: &Pose, b: &Pose, t_a: f64, t_b: f64, t: f64) -> Result<Pose, LieError> {
    if t_a == t_b {
        return Err(LieError::DegenerateSegment(t_a));
    }
    if !(t_a < t_b) || t < t_a || t > t_b {
        return Err(LieError::OutsideSegment { t, t_a, t_b });
    }
    if t == t_a {
        return Ok(*a);
    }
    if t == t_b {
        return Ok(*b);
    }
    let delta = a.log_map(b)?;
    let s = (t - t_a) / (t_b - t_a);
    Ok(a.retract(&delta.scaled(s)))
}
