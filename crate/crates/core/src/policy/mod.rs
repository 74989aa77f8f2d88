//! Gaussian MLP policies.
//!
//! Both levels share one network type: a ReLU MLP maps the standardised
//! concatenation `[state, goal]` to the mean of a diagonal Gaussian whose
//! log standard deviations are free, state-independent parameters. The low
//! level's output is an environment action, the high level's a subgoal state.
//!
//! Gradients are computed by hand-written reverse-mode passes over batches.
//! A [`ScoreBatch`] keeps the per-layer activations and backpropagated
//! signals of every sample, which is enough to form weighted gradient sums
//! and empirical Fisher-vector products without materialising per-sample
//! gradient vectors.

mod executor;
pub mod io;
mod network;
mod params;

pub use executor::{
    run_flat_batch, run_hierarchical, run_hierarchical_batch, run_open_loop, Decision, ExecutorConfig,
    HierarchicalRollout, StepRollout,
};
pub use network::{gaussian_kl, ForwardCache, ScoreBatch};
pub use params::{MlpShape, PolicyParams, Standardizer, LOG_STD_MAX, LOG_STD_MIN};
