//! Scripted play-style demonstrator.

use log::warn;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};

use super::{Action, CompoundGoal, EnvSpec, EFFECTOR_DIM};
use crate::data::{Source, Trajectory, TrajectoryMeta};
use crate::error::{Error, Result};
use crate::seed;

/// Default standard deviation of the Gaussian control noise.
pub const DEMO_NOISE_SCALE: f64 = 0.01;

/// The demonstrator keeps pushing an element until its joint is within this
/// fraction of the completion tolerance, so demos finish with some margin.
pub const SETTLE_FRACTION: f64 = 0.25;

/// Roll out the scripted demonstrator for the goal's four elements.
///
/// Elements are visited in a seed-determined random order. For each one the
/// effector is steered onto the site at full speed, then held there under a
/// proportional correction while effort is applied until the joint settles.
/// The result is a bare trajectory with no goal annotation.
pub fn scripted_demo(spec: &EnvSpec, goal: &CompoundGoal, noise_scale: f64, seed: u64) -> Result<Trajectory> {
    if !(noise_scale.is_finite() && noise_scale >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "demo noise scale must be non-negative, got {noise_scale}"
        )));
    }
    let noise = Normal::new(0.0, noise_scale).expect("finite non-negative std");
    let mut rng = seed::rng(seed, &[seed::stream::DEMOS]);
    let mut order = goal.active_elements.to_vec();
    order.shuffle(&mut rng);

    let mut state = spec.initial_state(&mut rng);
    let settle = spec.completion_tolerance() * SETTLE_FRACTION;
    let speed = spec.max_effector_speed();
    let capture = 0.5 * spec.interaction_radius();

    let mut states = vec![state.to_vec()];
    let mut actions = Vec::new();
    let mut truncated = false;
    let mut pending = order.into_iter();
    let mut current = pending.next();

    while let Some(element) = current {
        let target = goal.target_state[EFFECTOR_DIM + element];
        if (state.joints[element] - target).abs() < settle {
            current = pending.next();
            continue;
        }
        if state.t >= spec.episode_length() {
            truncated = true;
            break;
        }
        let site = spec.element_sites()[element];
        let d = [site[0] - state.effector[0], site[1] - state.effector[1]];
        let dist = d[0].hypot(d[1]);
        let (dx, dy, effort) = if dist > capture {
            let k = (speed / dist).min(1.0);
            (k * d[0], k * d[1], 0.0)
        } else {
            (0.5 * d[0], 0.5 * d[1], (target - state.joints[element]).signum())
        };
        let action = Action::new(
            dx + noise.sample(&mut rng),
            dy + noise.sample(&mut rng),
            effort + noise.sample(&mut rng),
        )
        .clamped(speed);
        state = spec.step(&state, &action);
        states.push(state.to_vec());
        actions.push(action.to_vec());
    }
    if truncated {
        warn!(
            "scripted demo (seed {seed}, goal {}) truncated at {} steps",
            goal.label(),
            spec.episode_length()
        );
    }
    Ok(Trajectory {
        states,
        actions,
        meta: TrajectoryMeta {
            seed,
            source: Source::Demo,
            truncated,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{sample_compound_goals, step_completion, EnvConfig, EnvState};

    #[test]
    fn noiseless_demos_complete_every_goal() {
        let spec = EnvSpec::new(&EnvConfig::default()).unwrap();
        for goal in sample_compound_goals(&spec, 35, 0).unwrap() {
            for s in 0..5 {
                let traj = scripted_demo(&spec, &goal, 0.0, s).unwrap();
                assert!(!traj.meta.truncated);
                assert!(traj.len() <= spec.episode_length());
                let last = EnvState::from_slice(traj.final_state(), traj.len()).unwrap();
                assert_eq!(step_completion(&last, &goal, spec.completion_tolerance()), 4);
            }
        }
    }

    #[test]
    fn same_seed_same_demo() {
        let spec = EnvSpec::new(&EnvConfig::default()).unwrap();
        let goal = sample_compound_goals(&spec, 1, 9).unwrap().remove(0);
        let a = scripted_demo(&spec, &goal, 0.01, 42).unwrap();
        let b = scripted_demo(&spec, &goal, 0.01, 42).unwrap();
        assert_eq!(a, b);
        let c = scripted_demo(&spec, &goal, 0.01, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn short_episodes_truncate() {
        let spec = EnvSpec::new(&EnvConfig {
            episode_length: 10,
            ..EnvConfig::default()
        })
        .unwrap();
        let goal = sample_compound_goals(&spec, 1, 0).unwrap().remove(0);
        let traj = scripted_demo(&spec, &goal, 0.0, 1).unwrap();
        assert!(traj.meta.truncated);
        assert_eq!(traj.len(), 10);
    }

    #[test]
    fn negative_noise_rejected() {
        let spec = EnvSpec::new(&EnvConfig::default()).unwrap();
        let goal = sample_compound_goals(&spec, 1, 0).unwrap().remove(0);
        assert!(scripted_demo(&spec, &goal, -0.1, 1).is_err());
    }
}
