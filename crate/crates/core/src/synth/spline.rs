use nalgebra::Vector3;

use crate::lie::{Pose, Rotation3};

use super::SynthError;

/// Natural cubic interpolating spline on arbitrary increasing knots.
#[derive(Clone, Debug)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self, SynthError> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(SynthError::InvalidConfig(format!(
                "spline needs >= 2 matching knots, got {} / {}",
                n,
                y.len()
            )));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SynthError::InvalidConfig("spline knots not increasing".into()));
        }
        let mut m = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm on the interior equations
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut upper = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            for i in 1..n - 1 {
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                diag[i - 1] = 2.0 * (h0 + h1);
                upper[i - 1] = h1;
                rhs[i - 1] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
            }
            for i in 1..k {
                let lower = x[i + 1] - x[i];
                let w = lower / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
            }
        }
        Ok(Self { x, y, m })
    }

    pub fn start(&self) -> f64 {
        self.x[0]
    }

    pub fn end(&self) -> f64 {
        self.x[self.x.len() - 1]
    }

    /// Value, first and second derivative at `t` (extrapolates linearly in
    /// the curvature outside the knots).
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        let n = self.x.len();
        let i = self.x.partition_point(|&xi| xi <= t).clamp(1, n - 1) - 1;
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let (y0, y1) = (self.y[i], self.y[i + 1]);
        let f = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let df = (y1 - y0) / h + ((1.0 - 3.0 * a * a) * m0 + (3.0 * b * b - 1.0) * m1) * h / 6.0;
        let ddf = a * m0 + b * m1;
        (f, df, ddf)
    }
}

/// Position and ZYX Euler angles, each a natural cubic spline.
#[derive(Clone, Debug)]
pub struct PoseSpline {
    pos: [CubicSpline; 3],
    /// roll, pitch, yaw (unwrapped)
    ang: [CubicSpline; 3],
}

/// Spline value with analytic derivatives with respect to its own time.
#[derive(Clone, Copy, Debug)]
pub struct SplineSample {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub acceleration: Vector3<f64>,
    pub euler: Vector3<f64>,
    pub euler_rate: Vector3<f64>,
}

fn unwrap(prev: f64, a: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    prev + (a - prev + std::f64::consts::PI).rem_euclid(tau) - std::f64::consts::PI
}

impl PoseSpline {
    pub fn new(times: &[f64], positions: &[Vector3<f64>], euler: &[Vector3<f64>]) -> Result<Self, SynthError> {
        let comp = |v: &[Vector3<f64>], k: usize| CubicSpline::new(times.to_vec(), v.iter().map(|p| p[k]).collect());
        Ok(Self {
            pos: [comp(positions, 0)?, comp(positions, 1)?, comp(positions, 2)?],
            ang: [comp(euler, 0)?, comp(euler, 1)?, comp(euler, 2)?],
        })
    }

    /// Fits through sampled poses; roll and yaw are unwrapped.
    pub fn from_poses(times: &[f64], poses: &[Pose]) -> Result<Self, SynthError> {
        let positions: Vec<Vector3<f64>> = poses.iter().map(|p| p.translation).collect();
        let mut euler: Vec<Vector3<f64>> = Vec::with_capacity(poses.len());
        for p in poses {
            let (r, pi, y) = p.rotation.euler_zyx();
            let e = match euler.last() {
                Some(prev) => Vector3::new(unwrap(prev.x, r), pi, unwrap(prev.z, y)),
                None => Vector3::new(r, pi, y),
            };
            euler.push(e);
        }
        Self::new(times, &positions, &euler)
    }

    pub fn start(&self) -> f64 {
        self.pos[0].start()
    }

    pub fn end(&self) -> f64 {
        self.pos[0].end()
    }

    pub fn sample(&self, s: f64) -> SplineSample {
        let mut out = SplineSample {
            position: Vector3::zeros(),
            velocity: Vector3::zeros(),
            acceleration: Vector3::zeros(),
            euler: Vector3::zeros(),
            euler_rate: Vector3::zeros(),
        };
        for k in 0..3 {
            let (f, d, dd) = self.pos[k].eval(s);
            out.position[k] = f;
            out.velocity[k] = d;
            out.acceleration[k] = dd;
            let (a, da, _) = self.ang[k].eval(s);
            out.euler[k] = a;
            out.euler_rate[k] = da;
        }
        out
    }
}

/// Body angular velocity of `Rz(yaw) Ry(pitch) Rx(roll)` from Euler rates.
pub fn body_rate_from_euler(euler: &Vector3<f64>, rate: &Vector3<f64>) -> Vector3<f64> {
    let (sr, cr) = euler.x.sin_cos();
    let (sp, cp) = euler.y.sin_cos();
    Vector3::new(
        rate.x - rate.z * sp,
        rate.y * cr + rate.z * cp * sr,
        -rate.y * sr + rate.z * cp * cr,
    )
}

pub fn rotation_from_euler(e: &Vector3<f64>) -> Rotation3 {
    Rotation3::from_euler_zyx(e.x, e.y, e.z)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spline_reproduces_cubic_interior_derivative() {
        let x: Vec<f64> = (0..50).map(|i| i as f64 * 0.02).collect();
        let y: Vec<f64> = x.iter().map(|t| t.sin()).collect();
        let s = CubicSpline::new(x, y).unwrap();
        let (f, d, _) = s.eval(0.5);
        assert!((f - 0.5f64.sin()).abs() < 1e-7);
        assert!((d - 0.5f64.cos()).abs() < 1e-4);
    }

    #[test]
    fn spline_interpolates_knots() {
        let x = vec![0.0, 0.3, 0.5, 1.2, 2.0];
        let y = vec![1.0, -1.0, 2.0, 0.5, 0.0];
        let s = CubicSpline::new(x.clone(), y.clone()).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((s.eval(*a).0 - b).abs() < 1e-12);
        }
        assert_eq!(s.eval(0.0).2, 0.0);
    }

    #[test]
    fn body_rate_matches_finite_difference() {
        let e = Vector3::new(0.2, -0.3, 1.1);
        let r = Vector3::new(0.5, 0.7, -0.4);
        let h = 1e-6;
        let r0 = rotation_from_euler(&(e - r * h));
        let r1 = rotation_from_euler(&(e + r * h));
        let w = r0.transpose().compose(&r1).log().unwrap() / (2.0 * h);
        assert!((w - body_rate_from_euler(&e, &r)).norm() < 1e-6);
    }
}
