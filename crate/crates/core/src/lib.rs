//! Simulation and signal-processing library for a dual cold-atom
//! accelerometer-gyroscope based on a magnetically launched Mach-Zehnder
//! atom interferometer.
//!
//! The library covers the full measurement chain:
//!
//! - launch kinematics and ballistic trajectories ([`physics`])
//! - Mach-Zehnder phase models and fringe detection ([`interferometer`])
//! - Raman-spectroscopy launch velocimetry with two-photon light-shift
//!   correction ([`velocimetry`])
//! - vibration environments, classical sensor models and the
//!   sensitivity-function vibration correction ([`noise`])
//! - the ±k/±v measurement protocol, mid-fringe lock and demodulation
//!   ([`sequencer`])
//! - fixed-gain hybridization of classical and atomic streams ([`fusion`])
//! - Allan deviation, fringe fitting and the systematic-error budget
//!   ([`analysis`])
//!
//! Everything is deterministic given a master seed: random streams are
//! derived per consumer with [`rng::derive_seed`], so results do not depend
//! on thread count or evaluation order.

pub mod analysis;
pub mod constants;
pub mod error;
pub mod fusion;
pub mod interferometer;
pub mod noise;
pub mod physics;
pub mod rng;
pub mod sequencer;
pub mod velocimetry;

pub use error::CoreError;
