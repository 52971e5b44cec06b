//! Rotation group SO(3): Rodrigues exponential, logarithm and the left Jacobian.
//!
//! All closed forms switch to a 4th-order Taylor expansion below
//! [`SMALL_ANGLE`] radians where the closed-form coefficients cancel
//! catastrophically.

use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::LieError;

/// Angle below which series expansions replace the closed forms.
pub const SMALL_ANGLE: f64 = 1e-4;

/// Largest relative rotation angle accepted by the logarithm.
pub const MAX_LOG_ANGLE: f64 = std::f64::consts::PI - 1e-6;

/// Skew-symmetric (hat) matrix of `v`.
#[inline]
pub fn hat(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`hat`]; reads the antisymmetric part of `m`.
#[inline]
pub fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// Coefficients `(a, b)` of `Exp(w) = I + a [w]x + b [w]x^2`.
#[inline]
fn rodrigues_coeffs(theta: f64) -> (f64, f64) {
    if theta < SMALL_ANGLE {
        taylor_rodrigues_coeffs(theta)
    } else {
        closed_rodrigues_coeffs(theta)
    }
}

#[inline]
pub(crate) fn closed_rodrigues_coeffs(theta: f64) -> (f64, f64) {
    // 1 - cos(t) = 2 sin^2(t/2) keeps b accurate for small t.
    let s = (0.5 * theta).sin();
    (theta.sin() / theta, 2.0 * s * s / (theta * theta))
}

#[inline]
pub(crate) fn taylor_rodrigues_coeffs(theta: f64) -> (f64, f64) {
    let t2 = theta * theta;
    let t4 = t2 * t2;
    (
        1.0 - t2 / 6.0 + t4 / 120.0,
        0.5 - t2 / 24.0 + t4 / 720.0,
    )
}

/// Coefficient `c` of the left Jacobian `V = I + b [w]x + c [w]x^2`
/// (the `b` coefficient is shared with Rodrigues' `b`).
#[inline]
fn left_jacobian_coeff(theta: f64) -> f64 {
    if theta < SMALL_ANGLE {
        taylor_left_jacobian_coeff(theta)
    } else {
        closed_left_jacobian_coeff(theta)
    }
}

#[inline]
pub(crate) fn closed_left_jacobian_coeff(theta: f64) -> f64 {
    (theta - theta.sin()) / (theta * theta * theta)
}

#[inline]
pub(crate) fn taylor_left_jacobian_coeff(theta: f64) -> f64 {
    let t2 = theta * theta;
    1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0
}

/// Coefficient `e` of `V^-1 = I - 1/2 [w]x + e [w]x^2`.
#[inline]
fn inv_left_jacobian_coeff(theta: f64) -> f64 {
    if theta < SMALL_ANGLE {
        taylor_inv_left_jacobian_coeff(theta)
    } else {
        closed_inv_left_jacobian_coeff(theta)
    }
}

#[inline]
pub(crate) fn closed_inv_left_jacobian_coeff(theta: f64) -> f64 {
    // t sin t / (2 (1 - cos t)) = (t/2) cot(t/2)
    let half = 0.5 * theta;
    (1.0 - half * half.cos() / half.sin()) / (theta * theta)
}

#[inline]
pub(crate) fn taylor_inv_left_jacobian_coeff(theta: f64) -> f64 {
    let t2 = theta * theta;
    1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0
}

/// Which evaluation of the SO(3) series coefficients to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeriesBranch {
    /// Pick by angle (what every other function in this module does).
    Auto,
    ClosedForm,
    Taylor,
}

fn coeffs_for(theta: f64, branch: SeriesBranch) -> (f64, f64, f64, f64) {
    let taylor = match branch {
        SeriesBranch::Auto => theta < SMALL_ANGLE,
        SeriesBranch::ClosedForm => false,
        SeriesBranch::Taylor => true,
    };
    if taylor {
        let (a, b) = taylor_rodrigues_coeffs(theta);
        (a, b, taylor_left_jacobian_coeff(theta), taylor_inv_left_jacobian_coeff(theta))
    } else {
        let (a, b) = closed_rodrigues_coeffs(theta);
        (a, b, closed_left_jacobian_coeff(theta), closed_inv_left_jacobian_coeff(theta))
    }
}

/// `(Exp(w), V(w), V(w)^-1)` evaluated with an explicit series branch.
pub fn exp_and_jacobians_with(
    w: &Vector3<f64>,
    branch: SeriesBranch,
) -> (Matrix3<f64>, Matrix3<f64>, Matrix3<f64>) {
    let (a, b, c, e) = coeffs_for(w.norm(), branch);
    let k = hat(w);
    let k2 = k * k;
    let id = Matrix3::identity();
    (id + k * a + k2 * b, id + k * b + k2 * c, id - k * 0.5 + k2 * e)
}

/// Left Jacobian of SO(3), `V(w)`; maps twist translation to group translation.
pub fn left_jacobian(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta = w.norm();
    let (_, b) = rodrigues_coeffs(theta);
    let c = left_jacobian_coeff(theta);
    let k = hat(w);
    Matrix3::identity() + k * b + k * k * c
}

/// Inverse of [`left_jacobian`].
pub fn left_jacobian_inv(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta = w.norm();
    let e = inv_left_jacobian_coeff(theta);
    let k = hat(w);
    Matrix3::identity() - k * 0.5 + k * k * e
}

/// Right Jacobian, `Jr(w) = Jl(-w)`.
pub fn right_jacobian(w: &Vector3<f64>) -> Matrix3<f64> {
    left_jacobian(&(-w))
}

/// A 3x3 rotation matrix (orthonormal, det = +1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rotation3(Matrix3<f64>);

impl Default for Rotation3 {
    fn default() -> Self {
        Self::identity()
    }
}

impl Rotation3 {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Wraps a matrix without checking orthonormality.
    pub fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Self(m)
    }

    /// Wraps a matrix after checking `R^T R = I` and `det R = 1` within `tol`.
    pub fn from_matrix(m: Matrix3<f64>, tol: f64) -> Result<Self, LieError> {
        let ortho = (m.transpose() * m - Matrix3::identity()).abs().max();
        let det = (m.determinant() - 1.0).abs();
        if ortho > tol || det > tol || !m.iter().all(|x| x.is_finite()) {
            return Err(LieError::NotARotation { ortho, det });
        }
        Ok(Self(m))
    }

    /// Rotation from a unit quaternion given as `(w, x, y, z)`.
    pub fn from_quaternion(w: f64, x: f64, y: f64, z: f64) -> Self {
        let q = UnitQuaternion::new_normalize(nalgebra::Quaternion::new(w, x, y, z));
        Self(*q.to_rotation_matrix().matrix())
    }

    /// Unit quaternion `(w, x, y, z)` with non-negative scalar part.
    pub fn to_quaternion(&self) -> [f64; 4] {
        let rot = nalgebra::Rotation3::from_matrix_unchecked(self.0);
        let q = UnitQuaternion::from_rotation_matrix(&rot);
        let (w, x, y, z) = (q.w, q.i, q.j, q.k);
        if w < 0.0 {
            [-w, -x, -y, -z]
        } else {
            [w, x, y, z]
        }
    }

    /// Rotation about the z axis.
    pub fn from_yaw(yaw: f64) -> Self {
        let (s, c) = yaw.sin_cos();
        Self(Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0))
    }

    /// `R = Rz(yaw) Ry(pitch) Rx(roll)`.
    pub fn from_euler_zyx(roll: f64, pitch: f64, yaw: f64) -> Self {
        let (sa, ca) = roll.sin_cos();
        let (sb, cb) = pitch.sin_cos();
        let (sg, cg) = yaw.sin_cos();
        Self(Matrix3::new(
            cg * cb,
            cg * sb * sa - sg * ca,
            cg * sb * ca + sg * sa,
            sg * cb,
            sg * sb * sa + cg * ca,
            sg * sb * ca - cg * sa,
            -sb,
            cb * sa,
            cb * ca,
        ))
    }

    /// `(roll, pitch, yaw)` of the `Rz Ry Rx` factorization.
    pub fn euler_zyx(&self) -> (f64, f64, f64) {
        let m = &self.0;
        let yaw = m[(1, 0)].atan2(m[(0, 0)]);
        let pitch = (-m[(2, 0)]).atan2((m[(2, 1)] * m[(2, 1)] + m[(2, 2)] * m[(2, 2)]).sqrt());
        let roll = m[(2, 1)].atan2(m[(2, 2)]);
        (roll, pitch, yaw)
    }

    pub fn yaw(&self) -> f64 {
        self.0[(1, 0)].atan2(self.0[(0, 0)])
    }

    #[inline]
    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    #[inline]
    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    #[inline]
    pub fn inverse(&self) -> Self {
        self.transpose()
    }

    #[inline]
    pub fn compose(&self, other: &Self) -> Self {
        Self(self.0 * other.0)
    }

    #[inline]
    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0 * v
    }

    /// Rodrigues' formula.
    pub fn exp(w: &Vector3<f64>) -> Self {
        let theta = w.norm();
        let (a, b) = rodrigues_coeffs(theta);
        let k = hat(w);
        Self(Matrix3::identity() + k * a + k * k * b)
    }

    /// Rotation vector of `self`; rejects angles at or beyond [`MAX_LOG_ANGLE`].
    pub fn log(&self) -> Result<Vector3<f64>, LieError> {
        let m = &self.0;
        let axis2 = Vector3::new(
            m[(2, 1)] - m[(1, 2)],
            m[(0, 2)] - m[(2, 0)],
            m[(1, 0)] - m[(0, 1)],
        );
        let sin2 = axis2.norm();
        let cos = 0.5 * (m.trace() - 1.0);
        let theta = (0.5 * sin2).atan2(cos);
        if theta >= MAX_LOG_ANGLE {
            return Err(LieError::AmbiguousLog { angle: theta });
        }
        let scale = if theta < SMALL_ANGLE {
            // theta / (2 sin theta)
            let t2 = theta * theta;
            0.5 * (1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0)
        } else {
            theta / (2.0 * theta.sin())
        };
        Ok(axis2 * scale)
    }

    /// Angle of the rotation in `[0, pi]`.
    pub fn angle(&self) -> f64 {
        let m = &self.0;
        let sin2 = Vector3::new(
            m[(2, 1)] - m[(1, 2)],
            m[(0, 2)] - m[(2, 0)],
            m[(1, 0)] - m[(0, 1)],
        )
        .norm();
        (0.5 * sin2).atan2(0.5 * (m.trace() - 1.0))
    }

    /// Nearest rotation in the Frobenius sense (polar projection).
    pub fn renormalized(&self) -> Self {
        let svd = self.0.svd(true, true);
        let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
        let mut r = u * vt;
        if r.determinant() < 0.0 {
            let mut u2 = u;
            u2.column_mut(2).neg_mut();
            r = u2 * vt;
        }
        Self(r)
    }
}

impl std::ops::Mul for Rotation3 {
    type Output = Rotation3;
    fn mul(self, rhs: Rotation3) -> Rotation3 {
        self.compose(&rhs)
    }
}

impl std::ops::Mul<Vector3<f64>> for Rotation3 {
    type Output = Vector3<f64>;
    fn mul(self, rhs: Vector3<f64>) -> Vector3<f64> {
        self.0 * rhs
    }
}
