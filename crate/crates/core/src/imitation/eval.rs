use serde::{Deserialize, Serialize};

use crate::env::{step_completion, CompoundGoal, EnvSpec, EnvState, GOAL_ELEMENTS};
use crate::error::Result;
use crate::policy::{run_flat_batch, run_hierarchical_batch, run_open_loop, ExecutorConfig, PolicyParams};
use crate::seed::{self, stream};

/// How actions are chosen during an evaluation episode.
#[derive(Clone, Copy, Debug)]
pub enum Controller<'a> {
    Hierarchical {
        high: &'a PolicyParams,
        low: &'a PolicyParams,
    },
    Flat(&'a PolicyParams),
    /// A fixed action sequence replayed without feedback.
    OpenLoop(&'a [Vec<f64>]),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub episodes_per_goal: usize,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            episodes_per_goal: 20,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    /// Index of the goal in the evaluated goal list.
    pub goal: usize,
    pub episode: usize,
    pub seed: u64,
    /// Step completion at the final state.
    pub completion: usize,
    pub success: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub episodes: usize,
    pub success_rate: f64,
    pub mean_completion: f64,
    /// Population standard deviation of the per-episode completion.
    pub std_completion: f64,
}

/// Seed of one evaluation episode. Every controller sees the same initial
/// states for the same `(goal, episode)`.
pub fn episode_seed(base: u64, goal: usize, episode: usize) -> u64 {
    seed::derive(base, &[stream::EVAL, goal as u64, episode as u64])
}

/// Roll out `controller` on goal number `goal_index` and score each episode.
pub fn evaluate_goal(
    spec: &EnvSpec,
    goal_index: usize,
    goal: &CompoundGoal,
    controller: Controller<'_>,
    cfg: &EvalConfig,
    exec: &ExecutorConfig,
) -> Result<Vec<EpisodeRecord>> {
    let seeds: Vec<u64> = (0..cfg.episodes_per_goal)
        .map(|e| episode_seed(cfg.seed, goal_index, e))
        .collect();
    let finals: Vec<Vec<f64>> = match controller {
        Controller::Hierarchical { high, low } => {
            run_hierarchical_batch(high, low, spec, &goal.target_state, &seeds, exec)?
                .into_iter()
                .map(|r| r.trajectory.final_state().to_vec())
                .collect()
        }
        Controller::Flat(policy) => run_flat_batch(policy, spec, &goal.target_state, &seeds, exec)?
            .into_iter()
            .map(|r| r.trajectory.final_state().to_vec())
            .collect(),
        Controller::OpenLoop(actions) => run_open_loop(spec, actions, &seeds, exec.episode_length)?
            .into_iter()
            .map(|t| t.final_state().to_vec())
            .collect(),
    };
    finals
        .iter()
        .zip(&seeds)
        .enumerate()
        .map(|(episode, (state, &seed))| {
            let state = EnvState::from_slice(state, exec.episode_length)?;
            let completion = step_completion(&state, goal, spec.completion_tolerance());
            Ok(EpisodeRecord {
                goal: goal_index,
                episode,
                seed,
                completion,
                success: completion == GOAL_ELEMENTS,
            })
        })
        .collect()
}

/// Evaluate one controller on every goal.
pub fn evaluate(
    spec: &EnvSpec,
    goals: &[CompoundGoal],
    controller: Controller<'_>,
    cfg: &EvalConfig,
    exec: &ExecutorConfig,
) -> Result<Vec<EpisodeRecord>> {
    let mut out = Vec::with_capacity(goals.len() * cfg.episodes_per_goal);
    for (g, goal) in goals.iter().enumerate() {
        out.extend(evaluate_goal(spec, g, goal, controller, cfg, exec)?);
    }
    Ok(out)
}

pub fn summarize(records: &[EpisodeRecord]) -> EvalSummary {
    let n = records.len();
    if n == 0 {
        return EvalSummary {
            episodes: 0,
            success_rate: 0.0,
            mean_completion: 0.0,
            std_completion: 0.0,
        };
    }
    let successes = records.iter().filter(|r| r.success).count();
    let mean = records.iter().map(|r| r.completion as f64).sum::<f64>() / n as f64;
    let var = records
        .iter()
        .map(|r| (r.completion as f64 - mean).powi(2))
        .sum::<f64>()
        / n as f64;
    EvalSummary {
        episodes: n,
        success_rate: successes as f64 / n as f64,
        mean_completion: mean,
        std_completion: var.sqrt(),
    }
}
