//! Lock-step batched rollouts.
//!
//! Each episode owns two random streams derived from its seed: one for the
//! initial state and one for policy noise. Episodes therefore reproduce
//! exactly no matter which batch they run in, and two controllers evaluated
//! on the same seeds start from the same states.

use ndarray::Array2;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PolicyParams;
use crate::data::{Source, Trajectory, TrajectoryMeta};
use crate::env::{Action, EnvSpec, EnvState, ACTION_DIM};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExecutorConfig {
    /// Steps between high-level decisions.
    pub horizon: usize,
    pub episode_length: usize,
    /// Act with distribution means instead of samples.
    pub deterministic: bool,
    /// Threads sharing a batch of episodes. Results do not depend on it.
    pub workers: usize,
}

impl Default for ExecutorConfig {
    fn default() -> Self {
        Self {
            horizon: 30,
            episode_length: 280,
            deterministic: false,
            workers: 1,
        }
    }
}

impl ExecutorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.episode_length < self.horizon {
            return Err(Error::InvalidConfig(format!(
                "exec.horizon must satisfy 1 <= horizon <= episode_length, got {} and {}",
                self.horizon, self.episode_length
            )));
        }
        if self.workers == 0 {
            return Err(Error::InvalidConfig("exec.workers must be at least 1".into()));
        }
        Ok(())
    }

    pub fn decisions_per_episode(&self) -> usize {
        self.episode_length.div_ceil(self.horizon)
    }
}

/// One high-level decision: the step it was taken and the raw sampled subgoal.
#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    pub step: usize,
    pub raw_subgoal: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HierarchicalRollout {
    pub trajectory: Trajectory,
    /// Unclamped low-level samples, the actions whose likelihood is scored.
    pub raw_actions: Vec<Vec<f64>>,
    /// Subgoal (clamped to the state box) in force at each step.
    pub subgoals: Vec<Vec<f64>>,
    pub decisions: Vec<Decision>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRollout {
    pub trajectory: Trajectory,
    pub raw_actions: Vec<Vec<f64>>,
}

struct Episodes {
    states: Vec<EnvState>,
    noise: Vec<ChaCha8Rng>,
    history: Vec<Vec<Vec<f64>>>,
    actions: Vec<Vec<Vec<f64>>>,
    raw: Vec<Vec<Vec<f64>>>,
}

impl Episodes {
    fn start(spec: &EnvSpec, seeds: &[u64]) -> Self {
        let states: Vec<EnvState> = seeds
            .iter()
            .map(|&s| spec.initial_state(&mut seed::rng(s, &[seed::stream::START])))
            .collect();
        Self {
            history: states.iter().map(|s| vec![s.to_vec()]).collect(),
            states,
            noise: seeds.iter().map(|&s| seed::rng(s, &[seed::stream::ROLLOUT])).collect(),
            actions: vec![Vec::new(); seeds.len()],
            raw: vec![Vec::new(); seeds.len()],
        }
    }

    fn apply(&mut self, spec: &EnvSpec, raw: &Array2<f64>) {
        for (i, row) in raw.rows().into_iter().enumerate() {
            let raw_action = row.to_vec();
            let action = Action::from_slice(&raw_action)
                .expect("policy emits three action components")
                .clamped(spec.max_effector_speed());
            self.states[i] = spec.step(&self.states[i], &action);
            self.history[i].push(self.states[i].to_vec());
            self.actions[i].push(action.to_vec());
            self.raw[i].push(raw_action);
        }
    }

    fn finish(self, seeds: &[u64]) -> Vec<(Trajectory, Vec<Vec<f64>>)> {
        self.history
            .into_iter()
            .zip(self.actions)
            .zip(self.raw)
            .zip(seeds)
            .map(|(((states, actions), raw), &seed)| {
                (
                    Trajectory {
                        states,
                        actions,
                        meta: TrajectoryMeta {
                            seed,
                            source: Source::Rollout,
                            truncated: false,
                        },
                    },
                    raw,
                )
            })
            .collect()
    }
}

fn act(
    policy: &PolicyParams,
    inputs: Array2<f64>,
    deterministic: bool,
    rngs: &mut [ChaCha8Rng],
) -> Result<Array2<f64>> {
    let mean = policy.forward_batch(inputs.view())?.mean;
    Ok(if deterministic {
        mean
    } else {
        policy.sample_rows(&mean.view(), rngs)
    })
}

fn check_dims(policy: &PolicyParams, spec: &EnvSpec, output: usize, what: &'static str) -> Result<()> {
    if policy.state_dim() != spec.state_dim() {
        return Err(Error::DimensionMismatch {
            context: what,
            expected: spec.state_dim(),
            got: policy.state_dim(),
        });
    }
    if policy.output_dim() != output {
        return Err(Error::DimensionMismatch {
            context: what,
            expected: output,
            got: policy.output_dim(),
        });
    }
    Ok(())
}

/// Split `seeds` into contiguous chunks, one per worker, and concatenate the
/// per-chunk results in seed order.
fn split_workers<T, F>(seeds: &[u64], workers: usize, run: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&[u64]) -> Result<Vec<T>> + Sync,
{
    let workers = workers.min(seeds.len()).max(1);
    if workers == 1 {
        return run(seeds);
    }
    let chunk = seeds.len().div_ceil(workers);
    let parts: Vec<Result<Vec<T>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = seeds.chunks(chunk).map(|part| scope.spawn(|| run(part))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("rollout worker panicked"))
            .collect()
    });
    let mut out = Vec::with_capacity(seeds.len());
    for part in parts {
        out.extend(part?);
    }
    Ok(out)
}

/// Run the two-level policy for every seed in lock-step.
///
/// Every `horizon` steps the high level samples a subgoal from
/// `pi_h(. | s_t, goal)`; the low level then acts on
/// `pi_l(. | s_t, subgoal)` at every step until the next decision.
pub fn run_hierarchical_batch(
    high: &PolicyParams,
    low: &PolicyParams,
    spec: &EnvSpec,
    goal: &[f64],
    seeds: &[u64],
    cfg: &ExecutorConfig,
) -> Result<Vec<HierarchicalRollout>> {
    cfg.validate()?;
    check_dims(high, spec, spec.state_dim(), "high-level policy")?;
    check_dims(low, spec, ACTION_DIM, "low-level policy")?;
    if goal.len() != spec.state_dim() {
        return Err(Error::DimensionMismatch {
            context: "high-level goal",
            expected: spec.state_dim(),
            got: goal.len(),
        });
    }
    split_workers(seeds, cfg.workers, |part| {
        hierarchical_chunk(high, low, spec, goal, part, cfg)
    })
}

fn hierarchical_chunk(
    high: &PolicyParams,
    low: &PolicyParams,
    spec: &EnvSpec,
    goal: &[f64],
    seeds: &[u64],
    cfg: &ExecutorConfig,
) -> Result<Vec<HierarchicalRollout>> {
    let n = seeds.len();
    let mut eps = Episodes::start(spec, seeds);
    let mut current: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut subgoals: Vec<Vec<Vec<f64>>> = vec![Vec::new(); n];
    let mut decisions: Vec<Vec<Decision>> = vec![Vec::new(); n];
    for t in 0..cfg.episode_length {
        if t % cfg.horizon == 0 {
            let rows: Vec<Vec<f64>> = eps.states.iter().map(|s| s.to_vec()).collect();
            let x = high.input_matrix(rows.iter().map(|s| (s.as_slice(), goal)))?;
            let raw = act(high, x, cfg.deterministic, &mut eps.noise)?;
            for (i, row) in raw.rows().into_iter().enumerate() {
                current[i] = row.iter().map(|v| v.clamp(0.0, 1.0)).collect();
                decisions[i].push(Decision {
                    step: t,
                    raw_subgoal: row.to_vec(),
                });
            }
        }
        let rows: Vec<Vec<f64>> = eps.states.iter().map(|s| s.to_vec()).collect();
        let x = low.input_matrix(rows.iter().zip(&current).map(|(s, g)| (s.as_slice(), g.as_slice())))?;
        let raw = act(low, x, cfg.deterministic, &mut eps.noise)?;
        eps.apply(spec, &raw);
        for (trace, g) in subgoals.iter_mut().zip(&current) {
            trace.push(g.clone());
        }
    }
    Ok(eps
        .finish(seeds)
        .into_iter()
        .zip(subgoals)
        .zip(decisions)
        .map(
            |(((trajectory, raw_actions), subgoals), decisions)| HierarchicalRollout {
                trajectory,
                raw_actions,
                subgoals,
                decisions,
            },
        )
        .collect())
}

/// Single-episode convenience wrapper.
pub fn run_hierarchical(
    high: &PolicyParams,
    low: &PolicyParams,
    spec: &EnvSpec,
    goal: &[f64],
    cfg: &ExecutorConfig,
    seed: u64,
) -> Result<HierarchicalRollout> {
    Ok(run_hierarchical_batch(high, low, spec, goal, &[seed], cfg)?.remove(0))
}

/// Run a flat goal-conditioned policy `pi(a | s, goal)`.
pub fn run_flat_batch(
    policy: &PolicyParams,
    spec: &EnvSpec,
    goal: &[f64],
    seeds: &[u64],
    cfg: &ExecutorConfig,
) -> Result<Vec<StepRollout>> {
    cfg.validate()?;
    check_dims(policy, spec, ACTION_DIM, "flat policy")?;
    split_workers(seeds, cfg.workers, |part| flat_chunk(policy, spec, goal, part, cfg))
}

fn flat_chunk(
    policy: &PolicyParams,
    spec: &EnvSpec,
    goal: &[f64],
    seeds: &[u64],
    cfg: &ExecutorConfig,
) -> Result<Vec<StepRollout>> {
    let mut eps = Episodes::start(spec, seeds);
    for _ in 0..cfg.episode_length {
        let rows: Vec<Vec<f64>> = eps.states.iter().map(|s| s.to_vec()).collect();
        let x = policy.input_matrix(rows.iter().map(|s| (s.as_slice(), goal)))?;
        let raw = act(policy, x, cfg.deterministic, &mut eps.noise)?;
        eps.apply(spec, &raw);
    }
    Ok(eps
        .finish(seeds)
        .into_iter()
        .map(|(trajectory, raw_actions)| StepRollout {
            trajectory,
            raw_actions,
        })
        .collect())
}

/// Replay a fixed action sequence from each seed's initial state, idling
/// once the sequence runs out.
pub fn run_open_loop(
    spec: &EnvSpec,
    actions: &[Vec<f64>],
    seeds: &[u64],
    episode_length: usize,
) -> Result<Vec<Trajectory>> {
    let mut eps = Episodes::start(spec, seeds);
    for t in 0..episode_length {
        let a = actions.get(t).cloned().unwrap_or_else(|| vec![0.0; ACTION_DIM]);
        if a.len() != ACTION_DIM {
            return Err(Error::DimensionMismatch {
                context: "open-loop action",
                expected: ACTION_DIM,
                got: a.len(),
            });
        }
        let raw = Array2::from_shape_fn((seeds.len(), ACTION_DIM), |(_, k)| a[k]);
        eps.apply(spec, &raw);
    }
    Ok(eps.finish(seeds).into_iter().map(|(t, _)| t).collect())
}
