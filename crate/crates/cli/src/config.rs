//! Optional TOML configuration; command-line flags take precedence.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Deserialize;

use lie_events::lie::{Manifold, Rotation3};
use lie_events::nalgebra::Vector3;
use lie_events::preint::{ImuCalibration, DEFAULT_GRAVITY};

pub const DEFAULT_THETA: f64 = 0.01;
pub const DEFAULT_BINS: usize = 200;
pub const DEFAULT_WINDOW: f64 = 1.0;
pub const DEFAULT_UPDATE_RATE: f64 = 20.0;

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub theta: Option<f64>,
    pub bins: Option<usize>,
    pub window: Option<f64>,
    pub update_rate: Option<f64>,
    pub manifold: Option<String>,
    pub seed: Option<u64>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
            }
        }
    }

    pub fn theta(&self, flag: Option<f64>) -> f64 {
        flag.or(self.theta).unwrap_or(DEFAULT_THETA)
    }

    pub fn bins(&self, flag: Option<usize>) -> usize {
        flag.or(self.bins).unwrap_or(DEFAULT_BINS)
    }

    pub fn window(&self, flag: Option<f64>) -> f64 {
        flag.or(self.window).unwrap_or(DEFAULT_WINDOW)
    }

    pub fn update_rate(&self, flag: Option<f64>) -> f64 {
        flag.or(self.update_rate).unwrap_or(DEFAULT_UPDATE_RATE)
    }

    pub fn seed(&self, flag: Option<u64>) -> u64 {
        flag.or(self.seed).unwrap_or(0)
    }

    pub fn manifold(&self, flag: Option<Manifold>) -> Result<Manifold> {
        if let Some(m) = flag {
            return Ok(m);
        }
        match &self.manifold {
            Some(s) => s.parse().map_err(anyhow::Error::msg),
            None => Ok(Manifold::SE3),
        }
    }
}

/// Calibration file: biases, gravity and the gravity-aligned frame as a
/// `[w, x, y, z]` quaternion. Missing keys take neutral values.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibFile {
    pub bias_gyro: Option<[f64; 3]>,
    pub bias_accel: Option<[f64; 3]>,
    pub gravity: Option<[f64; 3]>,
    pub gravity_frame: Option<[f64; 4]>,
}

impl CalibFile {
    pub fn load(path: &Path) -> Result<ImuCalibration> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading calibration {}", path.display()))?;
        let f: CalibFile = toml::from_str(&text).with_context(|| format!("parsing calibration {}", path.display()))?;
        let calib = f.calibration()?;
        calib.validate().with_context(|| format!("calibration {}", path.display()))?;
        Ok(calib)
    }

    pub fn calibration(&self) -> Result<ImuCalibration> {
        let frame = match self.gravity_frame {
            None => Rotation3::identity(),
            Some([w, x, y, z]) => {
                let n = (w * w + x * x + y * y + z * z).sqrt();
                anyhow::ensure!((n - 1.0).abs() <= 1e-6, "gravity_frame quaternion norm {n} is not 1");
                Rotation3::from_quaternion(w, x, y, z)
            }
        };
        Ok(ImuCalibration {
            bias_gyro: self.bias_gyro.map(Vector3::from).unwrap_or_else(Vector3::zeros),
            bias_accel: self.bias_accel.map(Vector3::from).unwrap_or_else(Vector3::zeros),
            gravity: self.gravity.map(Vector3::from).unwrap_or(DEFAULT_GRAVITY),
            gravity_frame: frame,
        })
    }
}
