//! Trajectory error metrics: displacement MSE, ATE, RTE, AYE and drift.

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;
use thiserror::Error;

use crate::lie::Rotation3;
use crate::traj::{Trajectory, TrajectorySample};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("no samples to evaluate")]
    Empty,
    #[error("sequences differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("RTE window {window} s is not shorter than the trajectory ({duration} s)")]
    WindowTooLong { window: f64, duration: f64 },
    #[error("ground-truth path length is zero")]
    ZeroPathLength,
    #[error("alignment needs at least 3 non-degenerate points")]
    DegenerateAlignment,
}

/// Estimate and ground truth on shared timestamps.
#[derive(Clone, Debug, PartialEq)]
pub struct AlignedTrajectoryPair {
    pub est: Vec<TrajectorySample>,
    pub gt: Vec<TrajectorySample>,
}

impl AlignedTrajectoryPair {
    pub fn new(est: Vec<TrajectorySample>, gt: Vec<TrajectorySample>) -> Result<Self, MetricsError> {
        if est.len() != gt.len() {
            return Err(MetricsError::LengthMismatch(est.len(), gt.len()));
        }
        if est.is_empty() {
            return Err(MetricsError::Empty);
        }
        Ok(Self { est, gt })
    }

    /// Resamples `est` at the ground-truth timestamps inside its span.
    pub fn associate(est: &Trajectory, gt: &Trajectory) -> Result<Self, MetricsError> {
        let mut e = Vec::new();
        let mut g = Vec::new();
        for s in &gt.samples {
            if let Some(x) = est.interpolate(s.t) {
                e.push(x);
                g.push(*s);
            }
        }
        Self::new(e, g)
    }

    pub fn len(&self) -> usize {
        self.gt.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gt.is_empty()
    }

    /// Applies `p -> s R p + t` and `R_est -> R R_est` to the estimate.
    pub fn transform_estimate(&mut self, sim: &Similarity) {
        for x in &mut self.est {
            x.position = sim.apply(&x.position);
            x.velocity = sim.rotation.rotate(&x.velocity) * sim.scale;
            x.rotation = sim.rotation.compose(&x.rotation);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Similarity {
    pub scale: f64,
    pub rotation: Rotation3,
    pub translation: Vector3<f64>,
}

impl Similarity {
    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.rotate(p) * self.scale + self.translation
    }
}

/// Least-squares `dst ~ s R src + t` (Umeyama); `with_scale = false` fixes `s = 1`.
pub fn umeyama(src: &[Vector3<f64>], dst: &[Vector3<f64>], with_scale: bool) -> Result<Similarity, MetricsError> {
    if src.len() != dst.len() {
        return Err(MetricsError::LengthMismatch(src.len(), dst.len()));
    }
    if src.len() < 3 {
        return Err(MetricsError::DegenerateAlignment);
    }
    let n = src.len() as f64;
    let mu_s = src.iter().sum::<Vector3<f64>>() / n;
    let mu_d = dst.iter().sum::<Vector3<f64>>() / n;
    let mut cov = Matrix3::zeros();
    let mut var_s = 0.0;
    for (a, b) in src.iter().zip(dst) {
        let (da, db) = (a - mu_s, b - mu_d);
        cov += db * da.transpose();
        var_s += da.norm_squared();
    }
    cov /= n;
    var_s /= n;
    if var_s <= 0.0 {
        return Err(MetricsError::DegenerateAlignment);
    }
    let svd = cov.svd(true, true);
    let (u, vt) = (svd.u.ok_or(MetricsError::DegenerateAlignment)?, svd.v_t.ok_or(MetricsError::DegenerateAlignment)?);
    let mut s = Matrix3::identity();
    if (u * vt).determinant() < 0.0 {
        s[(2, 2)] = -1.0;
    }
    let r = u * s * vt;
    let scale = if with_scale {
        (Matrix3::from_diagonal(&svd.singular_values) * s).trace() / var_s
    } else {
        1.0
    };
    let rotation = Rotation3::from_matrix_unchecked(r);
    Ok(Similarity {
        scale,
        rotation,
        translation: mu_d - rotation.rotate(&mu_s) * scale,
    })
}

/// Aligns the estimate positions onto ground truth in place.
pub fn align_umeyama(pair: &mut AlignedTrajectoryPair, with_scale: bool) -> Result<Similarity, MetricsError> {
    let src: Vec<_> = pair.est.iter().map(|s| s.position).collect();
    let dst: Vec<_> = pair.gt.iter().map(|s| s.position).collect();
    let sim = umeyama(&src, &dst, with_scale)?;
    pair.transform_estimate(&sim);
    Ok(sim)
}

/// RMSE of the position error.
pub fn ate(pair: &AlignedTrajectoryPair) -> Result<f64, MetricsError> {
    if pair.is_empty() {
        return Err(MetricsError::Empty);
    }
    let s: f64 = pair.est.iter().zip(&pair.gt).map(|(e, g)| (g.position - e.position).norm_squared()).sum();
    Ok((s / pair.len() as f64).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum RteMode {
    /// Estimated displacement rotated by `R_gamma R_gamma_hat^T` at the window start.
    YawCompensated,
    /// No rotation, for estimators without orientation.
    Identity,
}

/// RMSE of windowed displacement differences.
///
/// For each sample `i` the window end is the first sample at or after
/// `t_i + window`; windows running past the end are dropped.
pub fn rte(pair: &AlignedTrajectoryPair, window: f64, mode: RteMode) -> Result<f64, MetricsError> {
    if pair.is_empty() {
        return Err(MetricsError::Empty);
    }
    let t0 = pair.gt[0].t;
    let duration = pair.gt[pair.len() - 1].t - t0;
    if !(window > 0.0 && window < duration) {
        return Err(MetricsError::WindowTooLong { window, duration });
    }
    let eps = 1e-9;
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..pair.len() {
        let target = pair.gt[i].t + window - eps;
        let j = i + pair.gt[i..].partition_point(|s| s.t < target);
        if j >= pair.len() {
            break;
        }
        let dg = pair.gt[j].position - pair.gt[i].position;
        let de = pair.est[j].position - pair.est[i].position;
        let de = match mode {
            RteMode::YawCompensated => {
                let rel = Rotation3::from_yaw(pair.gt[i].rotation.yaw() - pair.est[i].rotation.yaw());
                rel.rotate(&de)
            }
            RteMode::Identity => de,
        };
        sum += (de - dg).norm_squared();
        count += 1;
    }
    if count == 0 {
        return Err(MetricsError::Empty);
    }
    Ok((sum / count as f64).sqrt())
}

/// Wraps an angle difference to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let w = a.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// Yaw RMSE in degrees, yaw from the `Rz Ry Rx` factorization.
pub fn aye(pair: &AlignedTrajectoryPair) -> Result<f64, MetricsError> {
    let yaws_g: Vec<f64> = pair.gt.iter().map(|s| s.rotation.yaw()).collect();
    let yaws_e: Vec<f64> = pair.est.iter().map(|s| s.rotation.yaw()).collect();
    aye_from_yaws(&yaws_g, &yaws_e)
}

/// Yaw RMSE in degrees from yaw angles in radians.
pub fn aye_from_yaws(gt: &[f64], est: &[f64]) -> Result<f64, MetricsError> {
    if gt.len() != est.len() {
        return Err(MetricsError::LengthMismatch(gt.len(), est.len()));
    }
    if gt.is_empty() {
        return Err(MetricsError::Empty);
    }
    let s: f64 = gt.iter().zip(est).map(|(g, e)| wrap_angle(g - e).powi(2)).sum();
    Ok((s / gt.len() as f64).sqrt().to_degrees())
}

/// Final position error over ground-truth path length, in percent.
pub fn drift(pair: &AlignedTrajectoryPair) -> Result<f64, MetricsError> {
    if pair.is_empty() {
        return Err(MetricsError::Empty);
    }
    let len: f64 = pair.gt.windows(2).map(|w| (w[1].position - w[0].position).norm()).sum();
    if len <= 0.0 {
        return Err(MetricsError::ZeroPathLength);
    }
    let n = pair.len() - 1;
    Ok(100.0 * (pair.gt[n].position - pair.est[n].position).norm() / len)
}

/// Mean squared displacement error.
pub fn displacement_mse(pred: &[Vector3<f64>], gt: &[Vector3<f64>]) -> Result<f64, MetricsError> {
    if pred.len() != gt.len() {
        return Err(MetricsError::LengthMismatch(pred.len(), gt.len()));
    }
    if pred.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(pred.iter().zip(gt).map(|(p, g)| (g - p).norm_squared()).sum::<f64>() / pred.len() as f64)
}

/// Median, averaging the two middle values for even counts; NaNs sort last.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MetricsReport {
    pub ate: f64,
    pub rte: f64,
    pub aye: f64,
    pub drift: f64,
    pub samples: usize,
}

impl MetricsReport {
    pub fn compute(pair: &AlignedTrajectoryPair, rte_window: f64, mode: RteMode) -> Result<Self, MetricsError> {
        Ok(Self {
            ate: ate(pair)?,
            rte: rte(pair, rte_window, mode)?,
            aye: aye(pair)?,
            drift: drift(pair)?,
            samples: pair.len(),
        })
    }

    /// Field-wise median over several trajectories.
    pub fn median_of(reports: &[MetricsReport]) -> Option<Self> {
        let col = |f: fn(&MetricsReport) -> f64| median(&reports.iter().map(f).collect::<Vec<_>>());
        Some(Self {
            ate: col(|r| r.ate)?,
            rte: col(|r| r.rte)?,
            aye: col(|r| r.aye)?,
            drift: col(|r| r.drift)?,
            samples: reports.iter().map(|r| r.samples).sum(),
        })
    }
}
