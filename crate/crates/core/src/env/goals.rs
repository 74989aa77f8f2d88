use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{EnvSpec, EnvState, EFFECTOR_DIM};
use crate::error::{Error, Result};
use crate::seed;

/// Number of elements a compound goal asks for.
pub const GOAL_ELEMENTS: usize = 4;

/// A target configuration: four active elements switched fully on, all other
/// elements at rest, effector at the centroid of the active sites.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompoundGoal {
    pub target_state: Vec<f64>,
    pub active_elements: [usize; GOAL_ELEMENTS],
}

impl CompoundGoal {
    pub fn new(spec: &EnvSpec, mut active: [usize; GOAL_ELEMENTS]) -> Result<Self> {
        active.sort_unstable();
        if active.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidConfig(format!(
                "compound goal elements must be distinct: {active:?}"
            )));
        }
        if let Some(&bad) = active.iter().find(|&&e| e >= spec.num_elements()) {
            return Err(Error::InvalidConfig(format!(
                "compound goal element {bad} out of range for {} elements",
                spec.num_elements()
            )));
        }
        let mut target = vec![0.0; spec.state_dim()];
        let sites = spec.element_sites();
        for &e in &active {
            target[0] += sites[e][0] / GOAL_ELEMENTS as f64;
            target[1] += sites[e][1] / GOAL_ELEMENTS as f64;
            target[EFFECTOR_DIM + e] = 1.0;
        }
        Ok(Self {
            target_state: target,
            active_elements: active,
        })
    }

    pub fn label(&self) -> String {
        self.active_elements
            .iter()
            .map(|e| e.to_string())
            .collect::<Vec<_>>()
            .join("-")
    }
}

fn subsets(n: usize) -> Vec<[usize; GOAL_ELEMENTS]> {
    let mut out = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                for d in c + 1..n {
                    out.push([a, b, c, d]);
                }
            }
        }
    }
    out
}

/// Draw `count` distinct compound goals uniformly over element subsets.
pub fn sample_compound_goals(spec: &EnvSpec, count: usize, seed: u64) -> Result<Vec<CompoundGoal>> {
    let mut all = subsets(spec.num_elements());
    if count > all.len() {
        return Err(Error::TooManyGoals {
            requested: count,
            available: all.len(),
        });
    }
    let mut rng = seed::rng(seed, &[seed::stream::GOALS]);
    all.shuffle(&mut rng);
    all.truncate(count);
    all.into_iter().map(|s| CompoundGoal::new(spec, s)).collect()
}

/// Every compound goal of the scene, in lexicographic order of elements.
pub fn all_compound_goals(spec: &EnvSpec) -> Result<Vec<CompoundGoal>> {
    subsets(spec.num_elements())
        .into_iter()
        .map(|s| CompoundGoal::new(spec, s))
        .collect()
}

/// Number of the goal's active elements whose joint is strictly within
/// `tolerance` of its target.
pub fn step_completion(state: &EnvState, goal: &CompoundGoal, tolerance: f64) -> usize {
    goal.active_elements
        .iter()
        .filter(|&&e| (state.joints[e] - goal.target_state[EFFECTOR_DIM + e]).abs() < tolerance)
        .count()
}
