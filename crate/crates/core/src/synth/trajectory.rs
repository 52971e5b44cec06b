use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::events::TimeMap;
use crate::lie::{Pose, Rotation3};

use super::spline::{body_rate_from_euler, rotation_from_euler, PoseSpline};
use super::SynthError;

/// A strictly increasing map of `[0, 1]` onto itself.
#[derive(Clone, Debug, PartialEq)]
pub enum Reparametrization {
    Identity,
    /// `u^alpha`
    Power(f64),
    /// `u + sum_k c_k sin(k pi u) / (k pi)` with `sum |c_k| < 1`.
    RandomMonotone(Vec<f64>),
}

impl Reparametrization {
    pub fn validate(&self) -> Result<(), SynthError> {
        match self {
            Reparametrization::Identity => Ok(()),
            Reparametrization::Power(a) if *a > 0.0 && a.is_finite() => Ok(()),
            Reparametrization::Power(a) => Err(SynthError::InvalidConfig(format!("power exponent {a} must be > 0"))),
            Reparametrization::RandomMonotone(c) => {
                let s: f64 = c.iter().map(|x| x.abs()).sum();
                if s < 1.0 {
                    Ok(())
                } else {
                    Err(SynthError::InvalidConfig(format!("monotone map coefficients sum to {s} >= 1")))
                }
            }
        }
    }

    /// Draws a smooth monotone map with `terms` sine modes.
    pub fn random_monotone<R: Rng + ?Sized>(rng: &mut R, terms: usize, strength: f64) -> Self {
        let raw: Vec<f64> = (0..terms).map(|_| rng.random_range(-1.0..1.0)).collect();
        let total: f64 = raw.iter().map(|x: &f64| x.abs()).sum::<f64>().max(1e-12);
        let scale = strength.clamp(0.0, 0.95) / total;
        Reparametrization::RandomMonotone(raw.into_iter().map(|c| c * scale).collect())
    }

    /// `(phi, phi', phi'')` at `u` in `[0, 1]`.
    pub fn eval(&self, u: f64) -> (f64, f64, f64) {
        match self {
            Reparametrization::Identity => (u, 1.0, 0.0),
            Reparametrization::Power(a) => {
                if u <= 0.0 {
                    let d = if *a < 1.0 {
                        f64::INFINITY
                    } else if *a == 1.0 {
                        1.0
                    } else {
                        0.0
                    };
                    return (0.0, d, if *a == 2.0 { 2.0 } else { 0.0 });
                }
                let p = u.powf(*a);
                (p, a * p / u, a * (a - 1.0) * p / (u * u))
            }
            Reparametrization::RandomMonotone(c) => {
                let (mut f, mut d, mut dd) = (u, 1.0, 0.0);
                for (k, ck) in c.iter().enumerate() {
                    let w = (k + 1) as f64 * PI;
                    let (s, co) = (w * u).sin_cos();
                    f += ck * s / w;
                    d += ck * co;
                    dd -= ck * w * s;
                }
                (f, d, dd)
            }
        }
    }

    pub fn apply(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return 1.0;
        }
        self.eval(u).0
    }

    pub fn inverse(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        if s >= 1.0 {
            return 1.0;
        }
        match self {
            Reparametrization::Identity => s,
            Reparametrization::Power(a) => s.powf(1.0 / a),
            Reparametrization::RandomMonotone(_) => {
                let (mut lo, mut hi) = (0.0f64, 1.0f64);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if self.eval(mid).0 < s {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                hi
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            Reparametrization::Identity => "t".into(),
            Reparametrization::Power(a) if *a == 1.0 => "t".into(),
            Reparametrization::Power(a) => format!("t^{a}"),
            Reparametrization::RandomMonotone(_) => "random".into(),
        }
    }
}

/// A reparametrization stretched over `[start, start + duration]`.
#[derive(Clone, Debug)]
pub struct WindowMap {
    pub phi: Reparametrization,
    pub start: f64,
    pub duration: f64,
}

impl TimeMap for WindowMap {
    fn apply(&self, t: f64) -> f64 {
        self.start + self.duration * self.phi.apply((t - self.start) / self.duration)
    }

    fn inverse(&self, s: f64) -> f64 {
        self.start + self.duration * self.phi.inverse((s - self.start) / self.duration)
    }
}

/// Kinematic quantities of a trajectory at one instant.
#[derive(Clone, Copy, Debug)]
pub struct KinematicState {
    pub pose: Pose,
    /// World-frame velocity.
    pub velocity: Vector3<f64>,
    /// World-frame acceleration (gravity not included).
    pub acceleration: Vector3<f64>,
    /// Body-frame angular velocity.
    pub omega: Vector3<f64>,
}

/// A spline-backed trajectory over `[start, start + duration]`, optionally
/// time-warped: `T(t) = T_base(phi(t))`.
#[derive(Clone, Debug)]
pub struct SynthTrajectory {
    spline: Arc<PoseSpline>,
    start: f64,
    duration: f64,
    /// Most recently applied first.
    maps: Vec<Reparametrization>,
}

impl SynthTrajectory {
    pub fn new(spline: PoseSpline) -> Self {
        let (start, end) = (spline.start(), spline.end());
        Self {
            spline: Arc::new(spline),
            start,
            duration: end - start,
            maps: Vec::new(),
        }
    }

    pub fn from_poses(times: &[f64], poses: &[Pose]) -> Result<Self, SynthError> {
        Ok(Self::new(PoseSpline::from_poses(times, poses)?))
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.start + self.duration
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// Sub-window of an unwarped trajectory.
    pub fn window(&self, start: f64, duration: f64) -> Result<Self, SynthError> {
        if !self.maps.is_empty() {
            return Err(SynthError::InvalidConfig("cannot cut a window from a warped trajectory".into()));
        }
        if start < self.start || start + duration > self.end() + 1e-12 || !(duration > 0.0) {
            return Err(SynthError::InvalidConfig(format!(
                "window [{start}, {}] outside [{}, {}]",
                start + duration,
                self.start,
                self.end()
            )));
        }
        Ok(Self {
            spline: self.spline.clone(),
            start,
            duration,
            maps: Vec::new(),
        })
    }

    /// `T(t) = self(phi(t))` on the same interval.
    pub fn reparametrize(&self, phi: Reparametrization) -> Result<Self, SynthError> {
        phi.validate()?;
        let mut maps = Vec::with_capacity(self.maps.len() + 1);
        maps.push(phi);
        maps.extend(self.maps.iter().cloned());
        Ok(Self {
            maps,
            ..self.clone()
        })
    }

    /// Spline time at `t` with its first two derivatives.
    pub fn spline_time(&self, t: f64) -> (f64, f64, f64) {
        let d = self.duration;
        let (mut x, mut dx, mut ddx) = ((t - self.start).clamp(0.0, d), 1.0, 0.0);
        for m in &self.maps {
            let u = x / d;
            let (f, df, ddf) = if u <= 0.0 {
                let (_, df, ddf) = m.eval(0.0);
                (0.0, df, ddf)
            } else if u >= 1.0 {
                let (_, df, ddf) = m.eval(1.0);
                (1.0, df, ddf)
            } else {
                m.eval(u)
            };
            let nx = d * f;
            let ndx = df * dx;
            let nddx = ddf / d * dx * dx + df * ddx;
            x = nx;
            dx = ndx;
            ddx = nddx;
        }
        (self.start + x, dx, ddx)
    }

    pub fn pose(&self, t: f64) -> Pose {
        let (s, _, _) = self.spline_time(t);
        let smp = self.spline.sample(s);
        Pose::se3(rotation_from_euler(&smp.euler), smp.position)
    }

    pub fn state(&self, t: f64) -> KinematicState {
        let (s, ds, dds) = self.spline_time(t);
        let smp = self.spline.sample(s);
        let rot: Rotation3 = rotation_from_euler(&smp.euler);
        KinematicState {
            pose: Pose::se3(rot, smp.position),
            velocity: smp.velocity * ds,
            acceleration: smp.acceleration * (ds * ds) + smp.velocity * dds,
            omega: body_rate_from_euler(&smp.euler, &(smp.euler_rate * ds)),
        }
    }

    /// Sample times `start + i / rate` up to the end (inclusive when it lands on the grid).
    pub fn sample_times(&self, rate: f64) -> Vec<f64> {
        let n = (self.duration * rate + 1e-9).floor() as usize;
        (0..=n).map(|i| self.start + i as f64 / rate).collect()
    }

    pub fn sample_poses(&self, rate: f64) -> (Vec<f64>, Vec<Pose>) {
        let times = self.sample_times(rate);
        let poses = times.iter().map(|&t| self.pose(t)).collect();
        (times, poses)
    }
}

/// Shape of the procedurally generated walking trajectories.
#[derive(Clone, Debug)]
pub struct WalkConfig {
    pub duration: f64,
    pub knot_spacing: f64,
    pub speed: (f64, f64),
    /// Standard deviation of the heading change per knot, rad.
    pub turn_sigma: f64,
    pub step_frequency: f64,
    pub bob_amplitude: f64,
    pub sway_amplitude: f64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            duration: 60.0,
            knot_spacing: 0.1,
            speed: (0.8, 1.6),
            turn_sigma: 0.04,
            step_frequency: 1.8,
            bob_amplitude: 0.03,
            sway_amplitude: 0.05,
        }
    }
}

/// A smooth pedestrian-like walk starting at the origin at `t = 0`.
pub fn random_walk<R: Rng + ?Sized>(rng: &mut R, cfg: &WalkConfig) -> Result<SynthTrajectory, SynthError> {
    let n = (cfg.duration / cfg.knot_spacing).ceil() as usize + 1;
    let turn = Normal::new(0.0, cfg.turn_sigma.max(0.0)).map_err(|e| SynthError::InvalidConfig(e.to_string()))?;
    let mut heading: f64 = rng.random_range(-PI..PI);
    let mut turn_rate = 0.0;
    let mut speed = rng.random_range(cfg.speed.0..=cfg.speed.1);
    let phase: f64 = rng.random_range(0.0..(2.0 * PI));
    let f = cfg.step_frequency;
    let mut xy = nalgebra::Vector2::new(0.0, 0.0);
    let mut times = Vec::with_capacity(n);
    let mut pos = Vec::with_capacity(n);
    let mut euler = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 * cfg.knot_spacing;
        let w = 2.0 * PI * f * t + phase;
        times.push(t);
        pos.push(Vector3::new(xy.x, xy.y, cfg.bob_amplitude * w.sin()));
        euler.push(Vector3::new(
            cfg.sway_amplitude * (0.5 * w).sin(),
            0.8 * cfg.sway_amplitude * (w + 0.5).sin(),
            heading + 0.6 * cfg.sway_amplitude * (0.5 * w + 1.0).sin(),
        ));
        turn_rate = 0.9 * turn_rate + turn.sample(rng);
        heading += turn_rate;
        speed = (speed + rng.random_range(-0.05..0.05)).clamp(cfg.speed.0, cfg.speed.1);
        xy += nalgebra::Vector2::new(heading.cos(), heading.sin()) * speed * cfg.knot_spacing;
    }
    Ok(SynthTrajectory::new(PoseSpline::new(&times, &pos, &euler)?))
}
