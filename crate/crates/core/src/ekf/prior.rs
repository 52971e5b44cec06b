use nalgebra::Matrix3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::events::LieEvent;
use crate::lie::Rotation3;
use crate::stack::EventStack;
use crate::traj::Trajectory;

use super::{DisplacementMeasurement, EkfError};

/// Smallest per-axis variance handed to the filter.
pub const VARIANCE_FLOOR: f64 = 1e-8;

/// What a prior sees for one window.
#[derive(Clone, Copy, Debug)]
pub struct PriorInput<'a> {
    pub t_start: f64,
    pub t_end: f64,
    /// Current estimate of the window-start clone rotation.
    pub clone_rotation: Rotation3,
    pub events: &'a [LieEvent],
    pub stack: Option<&'a EventStack>,
}

/// Maps a window to a yaw-frame displacement and its covariance.
pub trait DisplacementPrior {
    fn predict(&mut self, input: &PriorInput<'_>) -> Result<DisplacementMeasurement, EkfError>;

    /// Whether [`PriorInput::events`] and [`PriorInput::stack`] are needed.
    fn needs_events(&self) -> bool {
        true
    }
}

/// Ground-truth displacement plus isotropic Gaussian noise.
///
/// The displacement is rotated by the *estimated* yaw of the clone, so the
/// measurement carries no yaw information.
#[derive(Clone, Debug)]
pub struct OraclePrior {
    gt: Trajectory,
    sigma: f64,
    rng: ChaCha8Rng,
    with_events: bool,
}

impl OraclePrior {
    pub fn new(gt: Trajectory, sigma: f64, seed: u64) -> Result<Self, EkfError> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(EkfError::InvalidConfig(format!("oracle sigma must be >= 0, got {sigma}")));
        }
        if gt.len() < 2 {
            return Err(EkfError::InvalidConfig("oracle needs at least 2 ground-truth samples".into()));
        }
        Ok(Self {
            gt,
            sigma,
            rng: ChaCha8Rng::seed_from_u64(seed),
            with_events: true,
        })
    }

    /// Skip event generation in the filter loop; the oracle ignores it anyway.
    pub fn without_events(mut self) -> Self {
        self.with_events = false;
        self
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

impl DisplacementPrior for OraclePrior {
    fn predict(&mut self, input: &PriorInput<'_>) -> Result<DisplacementMeasurement, EkfError> {
        let a = self.gt.interpolate(input.t_start).ok_or(EkfError::NoGroundTruth(input.t_start))?;
        let b = self.gt.interpolate(input.t_end).ok_or(EkfError::NoGroundTruth(input.t_end))?;
        let rg = Rotation3::from_yaw(input.clone_rotation.yaw());
        let mut d = rg.transpose().rotate(&(b.position - a.position));
        if self.sigma > 0.0 {
            let n = Normal::new(0.0, self.sigma).expect("sigma checked in new");
            for k in 0..3 {
                d[k] += n.sample(&mut self.rng);
            }
        }
        let var = (self.sigma * self.sigma).max(VARIANCE_FLOOR);
        Ok(DisplacementMeasurement {
            d,
            sigma: Matrix3::identity() * var,
        })
    }

    fn needs_events(&self) -> bool {
        self.with_events
    }
}
