//! Hierarchical goal-conditioned imitation and reinforcement learning from
//! unstructured demonstrations.
//!
//! The crate is organised bottom-up:
//!
//! - [`env`]: a deterministic desk-scale kitchen with independently
//!   manipulable elements, compound goals and a scripted demonstrator.
//! - [`data`]: trajectories, relay relabeling into goal-conditioned tuples,
//!   and the oracle segmentation scheme used by a baseline.
//! - [`policy`]: Gaussian MLP policies with hand-written reverse-mode
//!   gradients and the two-level executor.
//! - [`imitation`]: maximum-likelihood training of both levels with ADAM.
//! - [`finetune`]: natural policy gradient fine-tuning with optional
//!   demonstration terms and iterative relabeling.
//! - [`harness`]: configuration, distillation, baselines, sweeps, reports
//!   and the command line driver.

pub mod data;
pub mod env;
pub mod error;
pub mod finetune;
pub mod harness;
pub mod imitation;
pub mod policy;
pub mod seed;

pub use error::{Error, Result};
