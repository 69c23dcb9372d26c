//! Spectrum sharing between a two-phase decode-and-forward relay network and
//! bursty ad-hoc traffic modeled as a binary continuous-time Markov chain.
//!
//! The crate predicts the expected collision time of a transmission schedule
//! from spectrum-sensing outcomes, and chooses powers, time fractions and
//! interval placements minimizing it under rate and power constraints, either
//! per frame or on long-term average.

pub mod access;
pub mod ergodic_solver;
pub mod error;
pub mod frame_solver;
pub mod netmodel;
pub mod rng;
pub mod traffic;

pub use error::{Error, Result};
