//! Natural policy gradient fine-tuning of imitation-initialised policies.
//!
//! The low level is trained as a goal-reaching policy for the subgoals the
//! high level commands: each high-level block is one low-level episode. The
//! demonstration term of DAPG-RPL and IRIL-RPL adds the mean likelihood
//! gradient of a random subset of the relabeled buffers.

mod collect;
mod npg;
mod returns;
mod reward;
mod run;

pub use collect::{collect_flat, collect_relay, completion_stats, FlatEpisode, PgSamples, RelayEpisode};
pub use npg::{
    conjugate_gradient, natural_direction, npg_step, surrogate_gradient, DemoTerm, NpgConfig, RolloutBatch, StepStats,
};
pub use returns::{advantages, baseline_features, discounted_returns, LinearBaseline};
pub use reward::{reward, RewardConfig, RewardKind};
pub use run::{
    finetune_flat, finetune_goal, pretrain_low_level_mode, FinetuneConfig, FlatResult, IterationHook, IterationStats,
    LevelUpdate, Mode, RelayResult, Task, Variant,
};
