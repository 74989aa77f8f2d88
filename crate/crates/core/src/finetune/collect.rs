//! Rollout collection with per-level rewards, and conversion of rollouts
//! into policy-gradient batches.

use ndarray::Array2;

use super::returns::{advantages, baseline_features, discounted_returns, LinearBaseline};
use super::{reward, RewardConfig};
use crate::data::Dataset;
use crate::env::{step_completion, CompoundGoal, EnvSpec, EnvState, GOAL_ELEMENTS};
use crate::error::{Error, Result};
use crate::policy::{
    run_flat_batch, run_hierarchical_batch, ExecutorConfig, HierarchicalRollout, PolicyParams, StepRollout,
};

/// A hierarchical rollout with the rewards seen by each level.
#[derive(Clone, Debug, PartialEq)]
pub struct RelayEpisode {
    pub rollout: HierarchicalRollout,
    /// `r_l(s_{t+1}, subgoal_t)` for every step.
    pub low_rewards: Vec<f64>,
    /// `r_h(s, goal)` at the state that closes each decision's block.
    pub high_rewards: Vec<f64>,
    pub completion: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlatEpisode {
    pub rollout: StepRollout,
    /// `r(s_{t+1}, goal)` for every step.
    pub rewards: Vec<f64>,
    pub completion: usize,
}

fn completion(spec: &EnvSpec, goal: &CompoundGoal, state: &[f64], t: usize) -> Result<usize> {
    Ok(step_completion(
        &EnvState::from_slice(state, t)?,
        goal,
        spec.completion_tolerance(),
    ))
}

/// Roll out the relay policy once per seed and score both levels.
pub fn collect_relay(
    high: &PolicyParams,
    low: &PolicyParams,
    spec: &EnvSpec,
    goal: &CompoundGoal,
    seeds: &[u64],
    exec: &ExecutorConfig,
    rewards: &RewardConfig,
) -> Result<Vec<RelayEpisode>> {
    if seeds.is_empty() {
        return Err(Error::Empty("rollout seeds"));
    }
    let rollouts = run_hierarchical_batch(high, low, spec, &goal.target_state, seeds, exec)?;
    rollouts
        .into_iter()
        .map(|rollout| {
            let states = &rollout.trajectory.states;
            let low_rewards = (0..rollout.trajectory.len())
                .map(|t| reward(rewards, &states[t + 1], &rollout.subgoals[t]))
                .collect::<Result<Vec<_>>>()?;
            let high_rewards = rollout
                .decisions
                .iter()
                .map(|d| {
                    let end = (d.step + exec.horizon).min(rollout.trajectory.len());
                    reward(rewards, &states[end], &goal.target_state)
                })
                .collect::<Result<Vec<_>>>()?;
            let completion = completion(spec, goal, rollout.trajectory.final_state(), exec.episode_length)?;
            Ok(RelayEpisode {
                rollout,
                low_rewards,
                high_rewards,
                completion,
            })
        })
        .collect()
}

/// Roll out a flat policy once per seed, rewarding every step against the goal.
pub fn collect_flat(
    policy: &PolicyParams,
    spec: &EnvSpec,
    goal: &CompoundGoal,
    seeds: &[u64],
    exec: &ExecutorConfig,
    rewards: &RewardConfig,
) -> Result<Vec<FlatEpisode>> {
    if seeds.is_empty() {
        return Err(Error::Empty("rollout seeds"));
    }
    run_flat_batch(policy, spec, &goal.target_state, seeds, exec)?
        .into_iter()
        .map(|rollout| {
            let states = &rollout.trajectory.states;
            let r = (1..states.len())
                .map(|t| reward(rewards, &states[t], &goal.target_state))
                .collect::<Result<Vec<_>>>()?;
            let completion = completion(spec, goal, rollout.trajectory.final_state(), exec.episode_length)?;
            Ok(FlatEpisode {
                rollout,
                rewards: r,
                completion,
            })
        })
        .collect()
}

/// Success rate and mean step completion over episodes' final states.
pub fn completion_stats(completions: impl Iterator<Item = usize>) -> (f64, f64) {
    let (mut n, mut wins, mut total) = (0usize, 0usize, 0usize);
    for c in completions {
        n += 1;
        total += c;
        wins += usize::from(c == GOAL_ELEMENTS);
    }
    let n = n.max(1) as f64;
    (wins as f64 / n, total as f64 / n)
}

/// Samples for one policy-gradient update, before advantage estimation.
#[derive(Clone, Debug, Default)]
pub struct PgSamples {
    pub states: Vec<Vec<f64>>,
    pub goals: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub returns: Vec<f64>,
    /// Position within the sample's own episode, in [0, 1).
    pub progress: Vec<f64>,
    /// Undiscounted reward per episode, for logging.
    pub episode_returns: Vec<f64>,
}

impl PgSamples {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    fn push_episode(
        &mut self,
        rows: impl Iterator<Item = (Vec<f64>, Vec<f64>, Vec<f64>)>,
        rewards: &[f64],
        gamma: f64,
    ) {
        let ret = discounted_returns(rewards, gamma);
        let len = rewards.len() as f64;
        for (k, (s, g, a)) in rows.enumerate() {
            self.states.push(s);
            self.goals.push(g);
            self.actions.push(a);
            self.returns.push(ret[k]);
            self.progress.push(k as f64 / len);
        }
        self.episode_returns.push(rewards.iter().sum());
    }

    /// Low-level samples. Each high-level block is its own goal-reaching
    /// episode for the low level, so returns stop at block boundaries.
    pub fn low_level(episodes: &[RelayEpisode], horizon: usize, gamma: f64) -> Self {
        let mut out = Self::default();
        for ep in episodes {
            let r = &ep.rollout;
            let len = r.trajectory.len();
            let mut sum = 0.0;
            for start in (0..len).step_by(horizon) {
                let end = (start + horizon).min(len);
                let rows = (start..end).map(|t| {
                    (
                        r.trajectory.states[t].clone(),
                        r.subgoals[t].clone(),
                        r.raw_actions[t].clone(),
                    )
                });
                out.push_episode(rows, &ep.low_rewards[start..end], gamma);
                sum += out.episode_returns.pop().unwrap_or(0.0);
            }
            out.episode_returns.push(sum);
        }
        out
    }

    /// High-level samples: one per decision, rewarded at block ends.
    pub fn high_level(episodes: &[RelayEpisode], goal: &[f64], gamma: f64) -> Self {
        let mut out = Self::default();
        for ep in episodes {
            let r = &ep.rollout;
            let rows = r.decisions.iter().map(|d| {
                (
                    r.trajectory.states[d.step].clone(),
                    goal.to_vec(),
                    d.raw_subgoal.clone(),
                )
            });
            out.push_episode(rows, &ep.high_rewards, gamma);
        }
        out
    }

    pub fn flat(episodes: &[FlatEpisode], goal: &[f64], gamma: f64) -> Self {
        let mut out = Self::default();
        for ep in episodes {
            let r = &ep.rollout;
            let rows = (0..r.trajectory.len())
                .map(|t| (r.trajectory.states[t].clone(), goal.to_vec(), r.raw_actions[t].clone()));
            out.push_episode(rows, &ep.rewards, gamma);
        }
        out
    }

    /// Returns minus a linear baseline fitted to this batch.
    pub fn advantages(&self, normalize: bool) -> Result<Vec<f64>> {
        let feats: Vec<Vec<f64>> = (0..self.len())
            .map(|i| baseline_features(&self.states[i], &self.goals[i], self.progress[i]))
            .collect();
        let baseline = LinearBaseline::fit(&feats, &self.returns)?;
        let predicted: Vec<f64> = feats.iter().map(|f| baseline.predict(f)).collect();
        Ok(advantages(&self.returns, &predicted, normalize))
    }

    pub fn matrices(&self, policy: &PolicyParams) -> Result<(Array2<f64>, Array2<f64>)> {
        let x = policy.input_matrix(
            self.states
                .iter()
                .zip(&self.goals)
                .map(|(s, g)| (s.as_slice(), g.as_slice())),
        )?;
        let a = rows_to_matrix(&self.actions, policy.output_dim())?;
        Ok((x, a))
    }

    pub fn mean_episode_return(&self) -> f64 {
        self.episode_returns.iter().sum::<f64>() / self.episode_returns.len().max(1) as f64
    }
}

fn rows_to_matrix(rows: &[Vec<f64>], cols: usize) -> Result<Array2<f64>> {
    let mut m = Array2::zeros((rows.len(), cols));
    for (i, r) in rows.iter().enumerate() {
        if r.len() != cols {
            return Err(Error::DimensionMismatch {
                context: "sample row",
                expected: cols,
                got: r.len(),
            });
        }
        m.row_mut(i).as_slice_mut().unwrap().copy_from_slice(r);
    }
    Ok(m)
}

/// Inputs and targets of the dataset tuples at `idx`.
pub fn dataset_matrices(ds: &Dataset, policy: &PolicyParams, idx: &[usize]) -> Result<(Array2<f64>, Array2<f64>)> {
    let x = policy.input_matrix(idx.iter().map(|&i| (ds.state(i), ds.goal(i))))?;
    let actions: Vec<Vec<f64>> = idx.iter().map(|&i| ds.action(i).to_vec()).collect();
    Ok((x, rows_to_matrix(&actions, policy.output_dim())?))
}
