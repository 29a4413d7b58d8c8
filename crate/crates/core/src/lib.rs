//! Predictive-map reinforcement learning on small graph tasks.
//!
//! The crate is organised around five pieces:
//!
//! * [`mdp`]: finite graph MDPs, task templates and structural edits.
//! * [`agents`]: model-free, model-based and successor-representation learners.
//! * [`replay`]: prioritized experience replay for SR-Dyna style agents.
//! * [`multiscale`]: SR ensembles over several discounts (distance, occupancy
//!   reconstruction, horizon fitting).
//! * [`spectral`]: place fields, eigenmaps and field-shape statistics.
//!
//! [`harness`] ties them together into the revaluation experiments exposed by
//! the `srplan` binary.

// `!(x > y)` style tests are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agents;
pub mod error;
pub mod harness;
pub mod mdp;
pub mod multiscale;
pub mod replay;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};

/// Seeded random stream used everywhere a simulation needs randomness.
pub type Rng = rand_chacha::ChaCha8Rng;
