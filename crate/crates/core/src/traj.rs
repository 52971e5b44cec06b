//! Timestamped navigation-state sequences (estimates and ground truth).

use nalgebra::Vector3;

use crate::lie::{geodesic_interp, Pose, Rotation3};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub rotation: Rotation3,
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub bias_gyro: Vector3<f64>,
    pub bias_accel: Vector3<f64>,
}

impl TrajectorySample {
    pub fn new(t: f64, rotation: Rotation3, position: Vector3<f64>, velocity: Vector3<f64>) -> Self {
        Self {
            t,
            rotation,
            position,
            velocity,
            bias_gyro: Vector3::zeros(),
            bias_accel: Vector3::zeros(),
        }
    }

    pub fn pose(&self) -> Pose {
        Pose::se3(self.rotation, self.position)
    }
}

/// Samples with strictly increasing timestamps.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
}

impl Trajectory {
    pub fn new(samples: Vec<TrajectorySample>) -> Self {
        Self { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn start(&self) -> Option<f64> {
        self.samples.first().map(|s| s.t)
    }

    pub fn end(&self) -> Option<f64> {
        self.samples.last().map(|s| s.t)
    }

    /// Geodesic pose and linear velocity at `t`; `None` outside the span.
    pub fn interpolate(&self, t: f64) -> Option<TrajectorySample> {
        let n = self.samples.len();
        if n == 0 || t < self.samples[0].t || t > self.samples[n - 1].t {
            return None;
        }
        let k = self.samples.partition_point(|s| s.t <= t);
        if k == n {
            return Some(self.samples[n - 1]);
        }
        let (a, b) = (&self.samples[k - 1], &self.samples[k]);
        if t == a.t {
            return Some(*a);
        }
        let p = geodesic_interp(&a.pose(), &b.pose(), a.t, b.t, t).ok()?;
        let s = (t - a.t) / (b.t - a.t);
        Some(TrajectorySample {
            t,
            rotation: p.rotation,
            position: p.translation,
            velocity: a.velocity + (b.velocity - a.velocity) * s,
            bias_gyro: a.bias_gyro + (b.bias_gyro - a.bias_gyro) * s,
            bias_accel: a.bias_accel + (b.bias_accel - a.bias_accel) * s,
        })
    }

    /// Total length of the position polyline.
    pub fn path_length(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| (w[1].position - w[0].position).norm())
            .sum()
    }
}
