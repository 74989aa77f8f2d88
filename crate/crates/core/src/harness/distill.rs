//! Distillation of per-goal fine-tuned policies into one multi-goal policy.

use std::sync::Arc;

use log::{info, warn};

use crate::data::{relabel_high, relabel_low, RelabelConfig, Trajectory};
use crate::env::{step_completion, CompoundGoal, EnvSpec, EnvState, GOAL_ELEMENTS};
use crate::error::{Error, Result};
use crate::imitation::{train_ril, ILConfig, ILReport};
use crate::policy::{run_hierarchical_batch, ExecutorConfig, PolicyParams};
use crate::seed::{self, stream};

/// A fine-tuned relay policy and the goal it was tuned for.
#[derive(Clone, Copy, Debug)]
pub struct Teacher<'a> {
    pub goal_index: usize,
    pub goal: &'a CompoundGoal,
    pub high: &'a PolicyParams,
    pub low: &'a PolicyParams,
}

#[derive(Clone, Debug)]
pub struct Distilled {
    pub high: PolicyParams,
    pub low: PolicyParams,
    pub report: ILReport,
    /// `(rollouts, successes kept)` per teacher, in teacher order.
    pub kept: Vec<(usize, usize)>,
}

/// Roll out a teacher `count` times and keep the episodes that solve its goal.
pub fn successful_rollouts(
    teacher: &Teacher<'_>,
    spec: &EnvSpec,
    exec: &ExecutorConfig,
    count: usize,
    seed: u64,
) -> Result<Vec<Trajectory>> {
    let seeds: Vec<u64> = (0..count)
        .map(|i| seed::derive(seed, &[stream::DISTILL, teacher.goal_index as u64, i as u64]))
        .collect();
    let rollouts = run_hierarchical_batch(
        teacher.high,
        teacher.low,
        spec,
        &teacher.goal.target_state,
        &seeds,
        exec,
    )?;
    let mut kept = Vec::new();
    for r in rollouts {
        let fin = EnvState::from_slice(r.trajectory.final_state(), exec.episode_length)?;
        if step_completion(&fin, teacher.goal, spec.completion_tolerance()) == GOAL_ELEMENTS {
            kept.push(r.trajectory);
        }
    }
    Ok(kept)
}

/// Collect each teacher's successful rollouts, relay-relabel them and train
/// a fresh relay policy on the union.
pub fn distill(
    teachers: &[Teacher<'_>],
    spec: &EnvSpec,
    exec: &ExecutorConfig,
    relabel: &RelabelConfig,
    il: &ILConfig,
    rollouts_per_goal: usize,
    seed: u64,
) -> Result<Distilled> {
    let mut pool = Vec::new();
    let mut kept = Vec::with_capacity(teachers.len());
    for t in teachers {
        let wins = successful_rollouts(t, spec, exec, rollouts_per_goal, seed)?;
        if wins.is_empty() {
            warn!("goal {} contributes no successful rollouts", t.goal.label());
        }
        kept.push((rollouts_per_goal, wins.len()));
        pool.extend(wins.into_iter().map(Arc::new));
    }
    if pool.is_empty() {
        return Err(Error::Empty("successful rollouts to distill"));
    }
    info!(
        "distilling {} successful rollouts from {} goals",
        pool.len(),
        teachers.len()
    );
    let d_low = relabel_low(&pool, relabel)?;
    let d_high = relabel_high(&pool, relabel)?;
    let cfg = ILConfig {
        seed: seed::derive(seed, &[stream::DISTILL]),
        ..il.clone()
    };
    let (high, low, report) = train_ril(&d_low, &d_high, &cfg)?;
    Ok(Distilled {
        high,
        low,
        report,
        kept,
    })
}
