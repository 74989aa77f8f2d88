//! Maximum-likelihood imitation of relabeled tuples.
//!
//! Both hierarchy levels and the flat baselines go through one minibatch
//! trainer, [`train_level`]; they differ only in the dataset and in which
//! seed streams initialise and shuffle.

mod adam;
mod eval;
mod train;

pub use adam::{Adam, AdamConfig};
pub use eval::{episode_seed, evaluate, evaluate_goal, summarize, Controller, EpisodeRecord, EvalConfig, EvalSummary};
pub use train::{fit_standardizer, train_flat, train_level, train_ril, EpochRecord, ILConfig, ILReport, LevelStreams};
