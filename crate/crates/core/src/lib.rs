//! Lie events: IMU pre-integrations sampled by on-manifold level crossing.
//!
//! The pipeline runs bias/gravity correction and forward-Euler
//! pre-integration ([`preint`]), samples the resulting pose signal into
//! events with unit-twist polarities ([`events`]), bins them into fixed-size
//! stacks ([`stack`]) and fuses window displacements in a clone-state EKF
//! ([`ekf`]). [`synth`] and [`metrics`] provide synthetic data and
//! trajectory evaluation.

pub mod ekf;
pub mod events;
pub mod io;
pub mod lie;
pub mod metrics;
pub mod par;
pub mod perf;
pub mod pipeline;
pub mod preint;
pub mod stack;
pub mod synth;
pub mod traj;

pub use nalgebra;
