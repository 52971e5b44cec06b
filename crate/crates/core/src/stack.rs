//! Fixed-size event stacks: `B x 12` rows of `[a_hat | omega_hat | polarity]`.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::events::LieEvent;

pub const DEFAULT_BINS: usize = 200;
pub const CHANNELS: usize = 12;

/// Summed polarities shorter than this are treated as cancelled.
pub const CANCELLATION_NORM: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventStack {
    pub bins: usize,
    /// Row-major `bins x CHANNELS`.
    pub data: Vec<f64>,
    pub occupancy: Vec<u32>,
}

impl EventStack {
    pub fn zeros(bins: usize) -> Self {
        Self {
            bins,
            data: vec![0.0; bins * CHANNELS],
            occupancy: vec![0; bins],
        }
    }

    pub fn row(&self, b: usize) -> &[f64] {
        &self.data[b * CHANNELS..(b + 1) * CHANNELS]
    }

    pub fn accel(&self, b: usize) -> Vector3<f64> {
        Vector3::from_row_slice(&self.row(b)[0..3])
    }

    pub fn omega(&self, b: usize) -> Vector3<f64> {
        Vector3::from_row_slice(&self.row(b)[3..6])
    }

    pub fn polarity(&self, b: usize) -> [f64; 6] {
        let mut p = [0.0; 6];
        p.copy_from_slice(&self.row(b)[6..12]);
        p
    }
}

/// Bin of the `j`-th event (1-based) out of `m`.
///
/// `floor((j-1)(B-1)/(M-1))`, computed in integers; `m = 1` maps to bin 0.
#[inline]
pub fn bin_index(j: usize, m: usize, bins: usize) -> usize {
    if m <= 1 || bins == 0 {
        return 0;
    }
    ((j - 1) * (bins - 1)) / (m - 1)
}

/// Bins `events` into `bins` rows.
///
/// IMU channels are averaged over every event in a bin; polarities are
/// summed over the events that carry one and rescaled to unit norm.
pub fn build_stack(events: &[LieEvent], bins: usize) -> EventStack {
    let mut stack = EventStack::zeros(bins);
    if bins == 0 {
        return stack;
    }
    let m = events.len();
    let mut pol = vec![[0.0f64; 6]; bins];
    for (idx, e) in events.iter().enumerate() {
        let b = bin_index(idx + 1, m, bins);
        stack.occupancy[b] += 1;
        let row = &mut stack.data[b * CHANNELS..(b + 1) * CHANNELS];
        for k in 0..3 {
            row[k] += e.accel_hat[k];
            row[3 + k] += e.omega_hat[k];
        }
        if let Some(p) = &e.polarity {
            let acc = &mut pol[b];
            for (a, v) in acc.iter_mut().zip(p.to_array()) {
                *a += v;
            }
        }
    }
    for b in 0..bins {
        let n = stack.occupancy[b];
        if n == 0 {
            continue;
        }
        let row = &mut stack.data[b * CHANNELS..(b + 1) * CHANNELS];
        let inv = n as f64;
        for v in &mut row[0..6] {
            *v /= inv;
        }
        let l = pol[b].iter().map(|v| v * v).sum::<f64>().sqrt();
        if l >= CANCELLATION_NORM {
            for k in 0..6 {
                row[6 + k] = pol[b][k] / l;
            }
        }
    }
    stack
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::{Pose, Twist};

    fn ev(tau: f64, p: Option<[f64; 6]>) -> LieEvent {
        LieEvent {
            tau,
            polarity: p.map(Twist::from_array),
            reference: Pose::identity(crate::lie::Manifold::SE3),
            omega_hat: Vector3::new(tau, 0.0, 1.0),
            accel_hat: Vector3::new(0.0, 2.0 * tau, -1.0),
        }
    }

    #[test]
    fn empty_is_zero() {
        let s = build_stack(&[], DEFAULT_BINS);
        assert!(s.data.iter().all(|&v| v == 0.0));
        assert_eq!(s.data.len(), DEFAULT_BINS * CHANNELS);
    }

    #[test]
    fn single_event_goes_to_bin_zero_without_polarity() {
        let s = build_stack(&[ev(0.0, None)], 4);
        assert_eq!(s.occupancy, vec![1, 0, 0, 0]);
        assert_eq!(s.accel(0), Vector3::new(0.0, 0.0, -1.0));
        assert_eq!(s.polarity(0), [0.0; 6]);
    }

    #[test]
    fn identity_placement_when_m_equals_b() {
        for j in 1..=200 {
            assert_eq!(bin_index(j, 200, 200), j - 1);
        }
    }

    #[test]
    fn antipodal_polarities_cancel_to_zero() {
        let e = vec![
            ev(0.0, Some([1.0, 0.0, 0.0, 0.0, 0.0, 0.0])),
            ev(0.1, Some([-1.0, 0.0, 0.0, 0.0, 0.0, 0.0])),
        ];
        let s = build_stack(&e, 1);
        assert_eq!(s.polarity(0), [0.0; 6]);
        assert_eq!(s.occupancy[0], 2);
    }

    #[test]
    fn index_in_range() {
        for m in 2..300 {
            for j in 1..=m {
                assert!(bin_index(j, m, 200) < 200);
            }
        }
    }
}
