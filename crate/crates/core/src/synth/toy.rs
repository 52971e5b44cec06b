use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::events::{generate, EventGenConfig, PiecewiseGeodesic};
use crate::lie::Manifold;
use crate::par::{self, Execution};
use crate::preint::{preintegrate, ImuCalibration};

use super::chamfer::chamfer_distance;
use super::imu::{synthesize_imu, NoiseSpec};
use super::trajectory::{random_walk, Reparametrization, SynthTrajectory, WalkConfig};
use super::SynthError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum ToyReference {
    #[serde(rename = "preint")]
    Preintegration,
    #[serde(rename = "gt")]
    GroundTruth,
}

impl ToyReference {
    pub fn label(&self) -> &'static str {
        match self {
            ToyReference::Preintegration => "preint",
            ToyReference::GroundTruth => "gt",
        }
    }
}

impl std::str::FromStr for ToyReference {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "preint" | "preintegration" => Ok(ToyReference::Preintegration),
            "gt" | "ground-truth" => Ok(ToyReference::GroundTruth),
            o => Err(format!("unknown reference '{o}' (expected preint or gt)")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ToyConfig {
    pub alphas: Vec<f64>,
    pub thetas: Vec<f64>,
    pub references: Vec<ToyReference>,
    /// Rate of the ground-truth poses, Hz.
    pub gt_rate: f64,
    /// Rate of the synthesized IMU, Hz.
    pub imu_rate: f64,
    pub manifold: Manifold,
    /// Sensor noise for the pre-integration reference; `seed` drives it.
    pub noise: NoiseSpec,
    /// Half-widths of the uniform turn-on gyro/accel bias drawn per window
    /// (rad/s, m/s^2). The biases are not known to the pre-integration.
    pub bias_range: (f64, f64),
    pub exec: Execution,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            alphas: vec![0.5, 2.0],
            thetas: vec![0.005, 0.01, 0.02],
            references: vec![ToyReference::Preintegration, ToyReference::GroundTruth],
            gt_rate: 200.0,
            imu_rate: 1000.0,
            manifold: Manifold::SE3,
            noise: NoiseSpec::default().sensor_only(),
            bias_range: (0.05, 0.2),
            exec: Execution::available(),
        }
    }
}

/// One cell of the report, averaged over windows.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ToyRow {
    pub reference: ToyReference,
    pub alpha: f64,
    pub corrected: bool,
    pub theta: f64,
    pub chamfer_pct: f64,
}

impl ToyRow {
    pub fn phi_label(&self) -> String {
        Reparametrization::Power(self.alpha).label()
    }
}

/// `n` windows cut from independent random walks of mixed activity level:
/// each walk has its own speed in `[0.05, 1.5]` m/s, with bob and sway
/// scaled to it, so the set spans near-stationary to brisk walking.
pub fn toy_windows(seed: u64, n: usize, duration: f64) -> Result<Vec<SynthTrajectory>, SynthError> {
    (0..n)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(i as u64 + 1)));
            let speed = rng.random_range(0.05..1.5);
            let level = speed / 1.5;
            let base = WalkConfig::default();
            let cfg = WalkConfig {
                duration: duration + 2.0,
                speed: (speed, speed),
                bob_amplitude: base.bob_amplitude * level,
                sway_amplitude: base.sway_amplitude * level,
                ..base
            };
            random_walk(&mut rng, &cfg)?.window(1.0, duration)
        })
        .collect()
}

fn event_times(
    traj: &SynthTrajectory,
    reference: ToyReference,
    theta: f64,
    cfg: &ToyConfig,
    rng_seed: u64,
) -> Result<Vec<f64>, SynthError> {
    let (times, poses) = traj.sample_poses(cfg.gt_rate);
    let ecfg = EventGenConfig {
        max_events: usize::MAX,
        ..EventGenConfig::new(theta, cfg.manifold)
    };
    let raw = match reference {
        ToyReference::GroundTruth => {
            let poses = poses.iter().map(|p| p.with_manifold(cfg.manifold)).collect();
            generate(&PiecewiseGeodesic::new(times, poses)?, &ecfg.crossing())?
        }
        ToyReference::Preintegration => {
            // refit through the pose samples so the IMU stays finite where
            // the warp has unbounded slope
            let refit = SynthTrajectory::from_poses(&times, &poses)?;
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            let mut noise = cfg.noise.clone();
            let (gb, ab) = cfg.bias_range;
            for k in 0..3 {
                noise.gyro_bias0[k] += if gb > 0.0 { rng.random_range(-gb..=gb) } else { 0.0 };
                noise.accel_bias0[k] += if ab > 0.0 { rng.random_range(-ab..=ab) } else { 0.0 };
            }
            let imu = synthesize_imu(&refit, cfg.imu_rate, &noise, &mut rng)?;
            let st = refit.state(refit.start());
            let path = preintegrate(&imu, &st.pose, st.velocity, &ImuCalibration::default())?;
            generate(&crate::events::reference_signal(&path, cfg.manifold)?, &ecfg.crossing())?
        }
    };
    let t0 = traj.start();
    Ok(raw.into_iter().map(|e| e.tau - t0).collect())
}

struct Cell {
    reference: ToyReference,
    alpha_idx: usize,
    theta_idx: usize,
    corrected: f64,
    uncorrected: f64,
}

fn run_window(w_idx: usize, traj: &SynthTrajectory, cfg: &ToyConfig) -> Result<Vec<Cell>, SynthError> {
    let d = traj.duration();
    let mut cells = Vec::new();
    for &reference in &cfg.references {
        for (ti, &theta) in cfg.thetas.iter().enumerate() {
            let seed = cfg
                .noise
                .seed
                .wrapping_add((w_idx as u64) << 20)
                .wrapping_add((ti as u64) << 8);
            let canonical = event_times(traj, reference, theta, cfg, seed)?;
            for (ai, &alpha) in cfg.alphas.iter().enumerate() {
                let phi = Reparametrization::Power(alpha);
                let warped = traj.reparametrize(phi.clone())?;
                let e_alpha = event_times(&warped, reference, theta, cfg, seed)?;
                let mapped: Vec<f64> = e_alpha.iter().map(|&t| d * phi.apply(t / d)).collect();
                cells.push(Cell {
                    reference,
                    alpha_idx: ai,
                    theta_idx: ti,
                    corrected: chamfer_distance(&mapped, &canonical, d)?,
                    uncorrected: chamfer_distance(&e_alpha, &canonical, d)?,
                });
            }
        }
    }
    Ok(cells)
}

/// Runs every (reference, theta, alpha) cell on every window and reports
/// window-averaged chamfer distances with and without the time correction.
pub fn run_toy_experiment(windows: &[SynthTrajectory], cfg: &ToyConfig) -> Result<Vec<ToyRow>, SynthError> {
    if windows.is_empty() {
        return Err(SynthError::InvalidConfig("toy experiment needs at least one window".into()));
    }
    for &a in &cfg.alphas {
        Reparametrization::Power(a).validate()?;
    }
    let indexed: Vec<(usize, &SynthTrajectory)> = windows.iter().enumerate().collect();
    let per_window = par::try_map(cfg.exec, &indexed, |(i, w)| run_window(*i, w, cfg))?;
    let mut rows = Vec::new();
    let n = windows.len() as f64;
    for &reference in &cfg.references {
        for (ti, &theta) in cfg.thetas.iter().enumerate() {
            for (ai, &alpha) in cfg.alphas.iter().enumerate() {
                let (mut c, mut u) = (0.0, 0.0);
                for cells in &per_window {
                    for cell in cells {
                        if cell.reference == reference && cell.alpha_idx == ai && cell.theta_idx == ti {
                            c += cell.corrected;
                            u += cell.uncorrected;
                        }
                    }
                }
                for (corrected, v) in [(true, c), (false, u)] {
                    rows.push(ToyRow {
                        reference,
                        alpha,
                        corrected,
                        theta,
                        chamfer_pct: v / n,
                    });
                }
            }
        }
    }
    Ok(rows)
}
