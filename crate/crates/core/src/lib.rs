//! Simulation of k-cycle discrete-time quantum walks and the direct
//! communication protocol built on their full-state recurrence.
//!
//! The crate is organised bottom-up:
//!
//! * [`walk`]: coin, shift and step operators, pure-state evolution and
//!   recurrence detection.
//! * [`noise`]: density matrices and the coin-factor amplitude-damping and
//!   depolarizing channels.
//! * [`info`]: entropies, coin/OAM mutual information, negativity and the
//!   eavesdropper's classical joint distribution.
//! * [`optics`]: abstract operator models of the optical elements and a
//!   check that a layout composes to one walk step.
//! * [`protocol`]: the six-step communication protocol, message codec and
//!   majority voting.
//! * [`attacks`]: eavesdropper strategies, closed-form security
//!   probabilities and Monte Carlo reports.

pub mod attacks;
pub mod codec;
pub mod error;
pub mod info;
pub mod noise;
pub mod optics;
pub mod protocol;
pub mod rng;
pub mod walk;

pub use error::{QsdcError, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
