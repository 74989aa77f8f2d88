//! Per-goal fine-tuning drivers.

use std::sync::Arc;

use log::info;
use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::collect::{collect_flat, collect_relay, completion_stats, dataset_matrices, PgSamples};
use super::npg::{npg_step, DemoTerm, NpgConfig, RolloutBatch, StepStats};
use super::RewardConfig;
use crate::data::{relabel_count, relabel_high, relabel_low, Dataset, RelabelConfig, Trajectory};
use crate::env::{CompoundGoal, EnvSpec};
use crate::error::{Error, Result};
use crate::policy::{ExecutorConfig, MlpShape, PolicyParams, Standardizer};
use crate::seed::{self, stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    /// Policy gradient only.
    #[serde(rename = "npg-rpl")]
    Npg,
    /// Policy gradient plus a fixed demonstration likelihood term.
    #[serde(rename = "dapg-rpl")]
    Dapg,
    /// As `Dapg`, with each iteration's rollouts relabeled into the buffers.
    #[serde(rename = "iril-rpl")]
    Iril,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Npg, Variant::Dapg, Variant::Iril];

    pub fn label(self) -> &'static str {
        match self {
            Variant::Npg => "npg-rpl",
            Variant::Dapg => "dapg-rpl",
            Variant::Iril => "iril-rpl",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Relay,
    Flat,
    PretrainLowLevel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FinetuneConfig {
    pub trajectories_per_iter: usize,
    pub gamma: f64,
    pub lambda_low: f64,
    pub lambda_high: f64,
    pub kl_delta: f64,
    pub cg_iters: usize,
    pub cg_damping: f64,
    /// Share of each rollout batch used for Fisher-vector products.
    pub fisher_sample_fraction: f64,
    pub iterations: usize,
    pub variant: Variant,
    pub mode: Mode,
    pub finetune_high: bool,
    pub normalize_advantages: bool,
    /// Demonstration tuples sampled per iteration for the likelihood term.
    pub demo_samples: usize,
    pub seed: u64,
    pub reward: RewardConfig,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        Self {
            trajectories_per_iter: 100,
            gamma: 0.995,
            lambda_low: 1e-4,
            lambda_high: 1e-4,
            kl_delta: 0.01,
            cg_iters: 10,
            cg_damping: 1e-4,
            fisher_sample_fraction: 1.0,
            iterations: 20,
            variant: Variant::Iril,
            mode: Mode::Relay,
            finetune_high: false,
            normalize_advantages: true,
            demo_samples: 4096,
            seed: 0,
            reward: RewardConfig::default(),
        }
    }
}

impl FinetuneConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(format!("finetune.{msg}")));
        if self.trajectories_per_iter == 0 {
            return bad("trajectories_per_iter must be at least 1");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(self.lambda_low >= 0.0 && self.lambda_high >= 0.0) {
            return bad("lambda_low and lambda_high must be non-negative");
        }
        match (self.mode, self.variant) {
            (Mode::Flat, Variant::Iril) => return bad("mode flat supports variants npg-rpl and dapg-rpl"),
            (Mode::PretrainLowLevel, v) if v != Variant::Npg => {
                return bad("mode pretrain-low-level trains the high level by RL alone (variant npg-rpl)")
            }
            _ => {}
        }
        self.reward.validate()?;
        self.npg().validate()
    }

    pub fn npg(&self) -> NpgConfig {
        NpgConfig {
            kl_delta: self.kl_delta,
            cg_iters: self.cg_iters,
            cg_damping: self.cg_damping,
            fisher_sample_fraction: self.fisher_sample_fraction,
            ..Default::default()
        }
    }

    fn demo_weight(&self, lambda: f64) -> f64 {
        match self.variant {
            Variant::Npg => 0.0,
            Variant::Dapg | Variant::Iril => lambda,
        }
    }
}

/// One parameter update of one network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelUpdate {
    /// `low`, `high` or `flat`.
    pub level: String,
    /// Mean undiscounted reward per episode seen by this level.
    pub mean_return: f64,
    #[serde(flatten)]
    pub step: StepStats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    pub iteration: usize,
    /// Task success over this iteration's rollouts, before the update.
    pub success_rate: f64,
    pub mean_completion: f64,
    pub env_steps: usize,
    pub buffer_low: usize,
    pub buffer_high: usize,
    pub updates: Vec<LevelUpdate>,
}

/// Called after every iteration with its statistics and the updated
/// networks, named `high`, `low` or `flat`.
pub type IterationHook<'h> = dyn FnMut(&IterationStats, &[(&str, &PolicyParams)]) -> Result<()> + 'h;

/// Static inputs of a per-goal fine-tuning run.
#[derive(Clone, Copy, Debug)]
pub struct Task<'a> {
    pub spec: &'a EnvSpec,
    pub goal: &'a CompoundGoal,
    pub exec: &'a ExecutorConfig,
    pub relabel: &'a RelabelConfig,
}

#[derive(Clone, Debug)]
pub struct RelayResult {
    pub high: PolicyParams,
    pub low: PolicyParams,
    pub stats: Vec<IterationStats>,
}

fn rollout_seeds(cfg: &FinetuneConfig, iteration: usize) -> Vec<u64> {
    (0..cfg.trajectories_per_iter)
        .map(|i| seed::derive(cfg.seed, &[stream::FINETUNE, iteration as u64, i as u64]))
        .collect()
}

fn check_divergence(value: f64, stats: &[IterationStats]) -> Result<()> {
    if value.is_finite() {
        return Ok(());
    }
    let dump = stats
        .last()
        .and_then(|s| serde_json::to_string(s).ok())
        .unwrap_or_else(|| "none".into());
    Err(Error::Divergence(format!(
        "mean return is {value}; last iteration stats: {dump}"
    )))
}

/// One natural gradient step on `samples`, adding the likelihood of a random
/// subset of `buffer` with weight `lambda`.
fn update_level(
    policy: &PolicyParams,
    samples: &PgSamples,
    buffer: Option<&Dataset>,
    lambda: f64,
    cfg: &FinetuneConfig,
    demo_stream: &[u64],
) -> Result<(PolicyParams, StepStats)> {
    let adv = samples.advantages(cfg.normalize_advantages)?;
    let (x, a) = samples.matrices(policy)?;
    let batch = RolloutBatch {
        inputs: x.view(),
        actions: a.view(),
        advantages: &adv,
    };
    let demo = match buffer {
        Some(ds) if lambda > 0.0 && !ds.is_empty() => {
            let mut rng = seed::rng(cfg.seed, demo_stream);
            let k = cfg.demo_samples.min(ds.len());
            let idx = index::sample(&mut rng, ds.len(), k).into_vec();
            Some(dataset_matrices(ds, policy, &idx)?)
        }
        _ => None,
    };
    let term = demo.as_ref().map(|(dx, da)| DemoTerm {
        inputs: dx.view(),
        actions: da.view(),
        weight: lambda,
    });
    npg_step(policy, &batch, term.as_ref(), &cfg.npg())
}

struct Buffers {
    low: Dataset,
    high: Dataset,
}

impl Buffers {
    fn grow(&mut self, rollouts: Vec<Trajectory>, relabel: &RelabelConfig) -> Result<()> {
        let pool: Vec<Arc<Trajectory>> = rollouts.into_iter().map(Arc::new).collect();
        let before = (self.low.len(), self.high.len());
        let lens: Vec<usize> = pool.iter().map(|t| t.len()).collect();
        self.low.append(&relabel_low(&pool, relabel)?)?;
        self.high.append(&relabel_high(&pool, relabel)?)?;
        debug_assert_eq!(
            self.low.len() - before.0,
            relabel_count(lens.iter().copied(), relabel.low_window)
        );
        debug_assert_eq!(
            self.high.len() - before.1,
            relabel_count(lens.iter().copied(), relabel.high_window)
        );
        Ok(())
    }
}

fn relay_loop(
    mut high: PolicyParams,
    mut low: PolicyParams,
    mut buffers: Buffers,
    task: &Task<'_>,
    cfg: &FinetuneConfig,
    train_low: bool,
    train_high: bool,
    mut hook: Option<&mut IterationHook<'_>>,
) -> Result<RelayResult> {
    let mut stats: Vec<IterationStats> = Vec::with_capacity(cfg.iterations);
    for it in 0..cfg.iterations {
        let seeds = rollout_seeds(cfg, it);
        let episodes = collect_relay(&high, &low, task.spec, task.goal, &seeds, task.exec, &cfg.reward)?;
        let (success_rate, mean_completion) = completion_stats(episodes.iter().map(|e| e.completion));
        let mut updates = Vec::new();
        if train_low {
            let samples = PgSamples::low_level(&episodes, task.exec.horizon, cfg.gamma);
            let mean_return = samples.mean_episode_return();
            check_divergence(mean_return, &stats)?;
            let lambda = cfg.demo_weight(cfg.lambda_low);
            let demo_stream = [stream::DEMO_BATCH, it as u64, 0];
            let (next, step) = update_level(&low, &samples, Some(&buffers.low), lambda, cfg, &demo_stream)?;
            low = next;
            updates.push(LevelUpdate {
                level: "low".into(),
                mean_return,
                step,
            });
        }
        if train_high {
            let samples = PgSamples::high_level(&episodes, &task.goal.target_state, cfg.gamma);
            let mean_return = samples.mean_episode_return();
            check_divergence(mean_return, &stats)?;
            let lambda = if cfg.mode == Mode::PretrainLowLevel {
                0.0
            } else {
                cfg.demo_weight(cfg.lambda_high)
            };
            let demo_stream = [stream::DEMO_BATCH, it as u64, 1];
            let (next, step) = update_level(&high, &samples, Some(&buffers.high), lambda, cfg, &demo_stream)?;
            high = next;
            updates.push(LevelUpdate {
                level: "high".into(),
                mean_return,
                step,
            });
        }
        if cfg.variant == Variant::Iril && cfg.mode == Mode::Relay {
            buffers.grow(
                episodes.into_iter().map(|e| e.rollout.trajectory).collect(),
                task.relabel,
            )?;
        }
        let record = IterationStats {
            iteration: it,
            success_rate,
            mean_completion,
            env_steps: seeds.len() * task.exec.episode_length,
            buffer_low: buffers.low.len(),
            buffer_high: buffers.high.len(),
            updates,
        };
        info!(
            "goal {} iteration {it}: success {:.2}, completion {:.2}",
            task.goal.label(),
            record.success_rate,
            record.mean_completion
        );
        if let Some(hook) = hook.as_mut() {
            hook(&record, &[("high", &high), ("low", &low)])?;
        }
        stats.push(record);
    }
    Ok(RelayResult { high, low, stats })
}

/// Fine-tune an imitation-initialised relay policy on one goal.
///
/// Every iteration collects fresh hierarchical rollouts and takes one
/// natural gradient step on the low level (and on the high level when
/// `finetune_high` is set). IRIL-RPL then relabels the rollouts into the
/// demonstration buffers.
pub fn finetune_goal(
    high: &PolicyParams,
    low: &PolicyParams,
    d_low: &Dataset,
    d_high: &Dataset,
    task: &Task<'_>,
    cfg: &FinetuneConfig,
    hook: Option<&mut IterationHook<'_>>,
) -> Result<RelayResult> {
    cfg.validate()?;
    if cfg.mode != Mode::Relay {
        return Err(Error::InvalidConfig("finetune_goal runs mode relay".into()));
    }
    let buffers = Buffers {
        low: d_low.clone(),
        high: d_high.clone(),
    };
    relay_loop(
        high.clone(),
        low.clone(),
        buffers,
        task,
        cfg,
        true,
        cfg.finetune_high,
        hook,
    )
}

#[derive(Clone, Debug)]
pub struct FlatResult {
    pub policy: PolicyParams,
    pub stats: Vec<IterationStats>,
}

/// Fine-tune a flat goal-conditioned policy, rewarding every step against
/// the goal; with a positive `lambda_low` and variant dapg-rpl the
/// demonstration term uses `d`.
pub fn finetune_flat(
    policy: &PolicyParams,
    d: &Dataset,
    task: &Task<'_>,
    cfg: &FinetuneConfig,
    mut hook: Option<&mut IterationHook<'_>>,
) -> Result<FlatResult> {
    cfg.validate()?;
    let mut policy = policy.clone();
    let mut stats: Vec<IterationStats> = Vec::with_capacity(cfg.iterations);
    for it in 0..cfg.iterations {
        let seeds = rollout_seeds(cfg, it);
        let episodes = collect_flat(&policy, task.spec, task.goal, &seeds, task.exec, &cfg.reward)?;
        let (success_rate, mean_completion) = completion_stats(episodes.iter().map(|e| e.completion));
        let samples = PgSamples::flat(&episodes, &task.goal.target_state, cfg.gamma);
        let mean_return = samples.mean_episode_return();
        check_divergence(mean_return, &stats)?;
        let lambda = cfg.demo_weight(cfg.lambda_low);
        let step = {
            let (next, step) = update_level(
                &policy,
                &samples,
                Some(d),
                lambda,
                cfg,
                &[stream::DEMO_BATCH, it as u64, 2],
            )?;
            policy = next;
            step
        };
        let record = IterationStats {
            iteration: it,
            success_rate,
            mean_completion,
            env_steps: seeds.len() * task.exec.episode_length,
            buffer_low: d.len(),
            buffer_high: 0,
            updates: vec![LevelUpdate {
                level: "flat".into(),
                mean_return,
                step,
            }],
        };
        if let Some(hook) = hook.as_mut() {
            hook(&record, &[("flat", &policy)])?;
        }
        stats.push(record);
    }
    Ok(FlatResult { policy, stats })
}

/// Learn a high level from scratch by RL on top of a frozen imitation low
/// level. The high level gets `standardizer` for its inputs and a fresh
/// initialisation from the high-level seed stream.
pub fn pretrain_low_level_mode(
    low: &PolicyParams,
    standardizer: Standardizer,
    hidden: &[usize],
    task: &Task<'_>,
    cfg: &FinetuneConfig,
    hook: Option<&mut IterationHook<'_>>,
) -> Result<RelayResult> {
    cfg.validate()?;
    let d = task.spec.state_dim();
    let shape = MlpShape::new(2 * d, hidden, d);
    let high = PolicyParams::init(
        shape,
        standardizer,
        &mut seed::rng(cfg.seed, &[stream::INIT_HIGH, stream::FINETUNE]),
    )?;
    let empty = Buffers {
        low: Dataset::new(crate::data::Level::Low, Vec::new()),
        high: Dataset::new(crate::data::Level::High, Vec::new()),
    };
    let cfg = FinetuneConfig {
        mode: Mode::PretrainLowLevel,
        variant: Variant::Npg,
        ..cfg.clone()
    };
    relay_loop(high, low.clone(), empty, task, &cfg, false, true, hook)
}
