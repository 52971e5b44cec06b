use nalgebra::{DMatrix, Matrix3, SMatrix, SVector, Vector3};

use crate::lie::so3::{hat, left_jacobian};
use crate::lie::Rotation3;
use crate::preint::RawImuSample;

use super::{EkfError, NoiseParams};

pub const STATE_DIM: usize = 15;
pub const CLONE_DIM: usize = 6;
/// Rotations are re-projected onto SO(3) after this many propagations.
pub const RENORMALIZE_EVERY: u64 = 1000;

pub type Matrix15 = SMatrix<f64, 15, 15>;
pub type Matrix15x12 = SMatrix<f64, 15, 12>;
pub type Vector15 = SVector<f64, 15>;
pub type Vector12 = SVector<f64, 12>;

/// Current navigation state `(R, v, p, b_g, b_a)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NavState {
    pub rotation: Rotation3,
    pub velocity: Vector3<f64>,
    pub position: Vector3<f64>,
    pub bias_gyro: Vector3<f64>,
    pub bias_accel: Vector3<f64>,
}

impl NavState {
    pub fn new(rotation: Rotation3, velocity: Vector3<f64>, position: Vector3<f64>) -> Self {
        Self {
            rotation,
            velocity,
            position,
            bias_gyro: Vector3::zeros(),
            bias_accel: Vector3::zeros(),
        }
    }
}

/// A past pose kept in the state; velocity is carried along for the
/// pre-integration of the window it starts, but has no error state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClonePose {
    pub t: f64,
    pub rotation: Rotation3,
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
}

/// Error-state retraction: `R <- Exp(dtheta) R`, everything else additive.
/// Ordering `[dtheta, dv, dp, dbg, dba]`.
pub fn boxplus(s: &NavState, d: &Vector15) -> NavState {
    let v3 = |k: usize| Vector3::new(d[k], d[k + 1], d[k + 2]);
    NavState {
        rotation: Rotation3::exp(&v3(0)).compose(&s.rotation),
        velocity: s.velocity + v3(3),
        position: s.position + v3(6),
        bias_gyro: s.bias_gyro + v3(9),
        bias_accel: s.bias_accel + v3(12),
    }
}

/// `a (-) b` such that `boxplus(b, a (-) b) = a`.
pub fn boxminus(a: &NavState, b: &NavState) -> Vector15 {
    let r = a
        .rotation
        .compose(&b.rotation.transpose())
        .log()
        .unwrap_or_else(|_| Vector3::repeat(f64::NAN));
    let mut d = Vector15::zeros();
    d.fixed_rows_mut::<3>(0).copy_from(&r);
    d.fixed_rows_mut::<3>(3).copy_from(&(a.velocity - b.velocity));
    d.fixed_rows_mut::<3>(6).copy_from(&(a.position - b.position));
    d.fixed_rows_mut::<3>(9).copy_from(&(a.bias_gyro - b.bias_gyro));
    d.fixed_rows_mut::<3>(12).copy_from(&(a.bias_accel - b.bias_accel));
    d
}

/// One strap-down step over `dt` driven by `m`, with explicit noise
/// `eta = [eta_g, eta_a, eta_gd, eta_ad]`.
pub fn propagate_nominal(
    s: &NavState,
    m: &RawImuSample,
    dt: f64,
    gravity: &Vector3<f64>,
    eta: &Vector12,
) -> NavState {
    let ng = Vector3::new(eta[0], eta[1], eta[2]);
    let na = Vector3::new(eta[3], eta[4], eta[5]);
    let ngd = Vector3::new(eta[6], eta[7], eta[8]);
    let nad = Vector3::new(eta[9], eta[10], eta[11]);
    let w = m.omega - s.bias_gyro - ng;
    let acc_w = s.rotation.rotate(&(m.accel - s.bias_accel - na));
    NavState {
        rotation: s.rotation.compose(&Rotation3::exp(&(w * dt))),
        velocity: s.velocity + (acc_w + gravity) * dt,
        position: s.position + s.velocity * dt + (acc_w + gravity) * (0.5 * dt * dt),
        bias_gyro: s.bias_gyro + ngd * dt,
        bias_accel: s.bias_accel + nad * dt,
    }
}

/// `(A^s, B^s)` of [`propagate_nominal`] at zero noise.
pub fn propagation_jacobians(s: &NavState, m: &RawImuSample, dt: f64) -> (Matrix15, Matrix15x12) {
    let w = (m.omega - s.bias_gyro) * dt;
    let r = *s.rotation.matrix();
    let ra = s.rotation.rotate(&(m.accel - s.bias_accel));
    let rjl = r * left_jacobian(&w) * dt;
    let ra_x = hat(&ra);
    let i3 = Matrix3::identity();
    let dt2 = 0.5 * dt * dt;

    let mut a = Matrix15::identity();
    a.fixed_view_mut::<3, 3>(0, 9).copy_from(&(-rjl));
    a.fixed_view_mut::<3, 3>(3, 0).copy_from(&(-ra_x * dt));
    a.fixed_view_mut::<3, 3>(3, 12).copy_from(&(-r * dt));
    a.fixed_view_mut::<3, 3>(6, 0).copy_from(&(-ra_x * dt2));
    a.fixed_view_mut::<3, 3>(6, 3).copy_from(&(i3 * dt));
    a.fixed_view_mut::<3, 3>(6, 12).copy_from(&(-r * dt2));

    let mut b = Matrix15x12::zeros();
    b.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-rjl));
    b.fixed_view_mut::<3, 3>(3, 3).copy_from(&(-r * dt));
    b.fixed_view_mut::<3, 3>(6, 3).copy_from(&(-r * dt2));
    b.fixed_view_mut::<3, 3>(9, 6).copy_from(&(i3 * dt));
    b.fixed_view_mut::<3, 3>(12, 9).copy_from(&(i3 * dt));
    (a, b)
}

/// Maps a left rotation perturbation to the change of the ZYX yaw; only the
/// third row is non-zero.
pub fn yaw_jacobian(rotation: &Rotation3) -> Matrix3<f64> {
    let (_, beta, gamma) = rotation.euler_zyx();
    let tb = beta.tan();
    let mut hz = Matrix3::zeros();
    hz[(2, 0)] = gamma.cos() * tb;
    hz[(2, 1)] = gamma.sin() * tb;
    hz[(2, 2)] = 1.0;
    hz
}

/// Displacement in the yaw frame of a clone, and the Kalman-gain result.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DisplacementMeasurement {
    pub d: Vector3<f64>,
    pub sigma: Matrix3<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpdateReport {
    /// `h(X) - d` before the update.
    pub innovation: Vector3<f64>,
    /// Normalized innovation squared.
    pub nis: f64,
}

/// Clone-state EKF: current state plus `n` clones, covariance of size
/// `6n + 15` ordered `[clone_1, ..., clone_n, current]`.
#[derive(Clone, Debug)]
pub struct FilterState {
    pub t: f64,
    pub current: NavState,
    pub clones: Vec<ClonePose>,
    pub cov: DMatrix<f64>,
    pub gravity: Vector3<f64>,
    pub clone_budget: usize,
    last_imu: Option<RawImuSample>,
    propagations: u64,
}

impl FilterState {
    pub fn new(t: f64, current: NavState, p0: &Matrix15, gravity: Vector3<f64>, clone_budget: usize) -> Self {
        Self {
            t,
            current,
            clones: Vec::new(),
            cov: DMatrix::from_column_slice(STATE_DIM, STATE_DIM, p0.as_slice()),
            gravity,
            clone_budget: clone_budget.max(1),
            last_imu: None,
            propagations: 0,
        }
    }

    pub fn dim(&self) -> usize {
        CLONE_DIM * self.clones.len() + STATE_DIM
    }

    /// Offset of the current-state block in `cov`.
    pub fn current_offset(&self) -> usize {
        CLONE_DIM * self.clones.len()
    }

    pub fn last_imu(&self) -> Option<&RawImuSample> {
        self.last_imu.as_ref()
    }

    /// Integrates the held sample up to `raw.t`, then holds `raw`.
    pub fn propagate(&mut self, raw: &RawImuSample, noise: &NoiseParams) -> Result<(), EkfError> {
        if raw.t < self.t || (raw.t == self.t && self.last_imu.is_none() && self.propagations > 0) {
            return Err(EkfError::NonMonotone { t: raw.t, last: self.t });
        }
        if self.last_imu.is_some() && raw.t > self.t {
            self.propagate_to(raw.t, noise)?;
        } else if self.last_imu.is_none() {
            self.t = raw.t;
        }
        self.last_imu = Some(*raw);
        Ok(())
    }

    /// Partial step to `t` with the held sample.
    pub fn propagate_to(&mut self, t: f64, noise: &NoiseParams) -> Result<(), EkfError> {
        if t < self.t {
            return Err(EkfError::NonMonotone { t, last: self.t });
        }
        if t == self.t {
            return Ok(());
        }
        let m = self.last_imu.ok_or(EkfError::NoImu)?;
        let dt = t - self.t;
        self.step(&m, dt, noise);
        self.t = t;
        Ok(())
    }

    fn step(&mut self, m: &RawImuSample, dt: f64, noise: &NoiseParams) {
        let (a, b) = propagation_jacobians(&self.current, m, dt);
        self.current = propagate_nominal(&self.current, m, dt, &self.gravity, &Vector12::zeros());
        self.propagations += 1;
        if self.propagations % RENORMALIZE_EVERY == 0 {
            self.current.rotation = self.current.rotation.renormalized();
        }

        let c = self.current_offset();
        let w = noise.covariance(dt);
        let pss: Matrix15 = self.cov.fixed_view::<15, 15>(c, c).into_owned();
        let new_ss = a * pss * a.transpose() + b * w * b.transpose();
        if c > 0 {
            let pcs = self.cov.view((0, c), (c, STATE_DIM)).into_owned();
            let at = DMatrix::from_column_slice(STATE_DIM, STATE_DIM, a.transpose().as_slice());
            let new_cs = pcs * at;
            self.cov.view_mut((0, c), (c, STATE_DIM)).copy_from(&new_cs);
            self.cov.view_mut((c, 0), (STATE_DIM, c)).copy_from(&new_cs.transpose());
        }
        let sym = (new_ss + new_ss.transpose()) * 0.5;
        self.cov.fixed_view_mut::<15, 15>(c, c).copy_from(&sym);
    }

    /// Appends the current pose (after a partial step to `t`) as a clone.
    /// When the budget is full the oldest clone is marginalized first.
    pub fn augment_clone(&mut self, t: f64, noise: &NoiseParams) -> Result<(), EkfError> {
        if self.t != t {
            self.propagate_to(t, noise)?;
        }
        while self.clones.len() >= self.clone_budget {
            self.marginalize_oldest();
        }
        let n = self.dim();
        let c = self.current_offset();
        let mut src: Vec<usize> = (0..c).collect();
        src.extend([c, c + 1, c + 2, c + 6, c + 7, c + 8]);
        src.extend(c..c + STATE_DIM);
        let cov = DMatrix::from_fn(n + CLONE_DIM, n + CLONE_DIM, |i, j| self.cov[(src[i], src[j])]);
        self.cov = cov;
        self.clones.push(ClonePose {
            t: self.t,
            rotation: self.current.rotation,
            position: self.current.position,
            velocity: self.current.velocity,
        });
        Ok(())
    }

    pub fn marginalize_oldest(&mut self) {
        if self.clones.is_empty() {
            return;
        }
        let n = self.dim();
        self.cov = self.cov.view((CLONE_DIM, CLONE_DIM), (n - CLONE_DIM, n - CLONE_DIM)).into_owned();
        self.clones.remove(0);
    }

    /// `h = R_gamma_j^T (p - p_j)` and its Jacobian in the sign convention
    /// used with `y = h - d`, i.e. `-dh/d(dX)`.
    pub fn measurement_jacobian(&self, j: usize) -> Result<(Vector3<f64>, DMatrix<f64>), EkfError> {
        let cl = self.clones.get(j).ok_or(EkfError::CloneIndex(j))?;
        let rg_t = *Rotation3::from_yaw(cl.rotation.yaw()).transpose().matrix();
        let h = rg_t * (self.current.position - cl.position);
        let mut hm = DMatrix::zeros(3, self.dim());
        let h_theta = rg_t * hat(&(cl.position - self.current.position)) * yaw_jacobian(&cl.rotation);
        hm.view_mut((0, CLONE_DIM * j), (3, 3)).copy_from(&h_theta);
        hm.view_mut((0, CLONE_DIM * j + 3), (3, 3)).copy_from(&rg_t);
        hm.view_mut((0, self.current_offset() + 6), (3, 3)).copy_from(&(-rg_t));
        Ok((h, hm))
    }

    /// Kalman update against clone `j` with a Joseph-form covariance update.
    pub fn measurement_update(
        &mut self,
        j: usize,
        meas: &DisplacementMeasurement,
    ) -> Result<UpdateReport, EkfError> {
        let (h, hm) = self.measurement_jacobian(j)?;
        let y = h - meas.d;
        let sigma = DMatrix::from_column_slice(3, 3, meas.sigma.as_slice());
        let pht = &self.cov * hm.transpose();
        let s = &hm * &pht + &sigma;
        let s_inv = s.clone().cholesky().ok_or(EkfError::SingularInnovation)?.inverse();
        let k = &pht * &s_inv;
        let yd = DMatrix::from_column_slice(3, 1, y.as_slice());
        let dx = &k * &yd;
        let nis = (yd.transpose() * &s_inv * &yd)[(0, 0)];

        for (idx, cl) in self.clones.iter_mut().enumerate() {
            let o = CLONE_DIM * idx;
            let dth = Vector3::new(dx[o], dx[o + 1], dx[o + 2]);
            cl.rotation = Rotation3::exp(&dth).compose(&cl.rotation);
            cl.position += Vector3::new(dx[o + 3], dx[o + 4], dx[o + 5]);
        }
        let c = self.current_offset();
        let ds = Vector15::from_iterator((0..STATE_DIM).map(|i| dx[c + i]));
        self.current = boxplus(&self.current, &ds);

        let n = self.dim();
        let ikh = DMatrix::identity(n, n) - &k * &hm;
        let p = &ikh * &self.cov * ikh.transpose() + &k * &sigma * k.transpose();
        self.cov = (&p + p.transpose()) * 0.5;
        Ok(UpdateReport { innovation: y, nis })
    }
}
