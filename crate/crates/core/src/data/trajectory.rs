use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Demo,
    Rollout,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub seed: u64,
    pub source: Source,
    pub truncated: bool,
}

/// States `s_0..s_T` and actions `a_0..a_{T-1}`; the terminal state is
/// stored explicitly so every relabeled goal is a state that was reached.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    /// Number of actions `T`.
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory holds at least s_0")
    }

    pub fn validate(&self, state_dim: usize, action_dim: usize) -> Result<()> {
        if self.states.len() != self.actions.len() + 1 {
            return Err(Error::format(
                "trajectory",
                format!("{} states for {} actions", self.states.len(), self.actions.len()),
            ));
        }
        if let Some(s) = self.states.iter().find(|s| s.len() != state_dim) {
            return Err(Error::DimensionMismatch {
                context: "trajectory state",
                expected: state_dim,
                got: s.len(),
            });
        }
        if let Some(a) = self.actions.iter().find(|a| a.len() != action_dim) {
            return Err(Error::DimensionMismatch {
                context: "trajectory action",
                expected: action_dim,
                got: a.len(),
            });
        }
        if self.states.iter().flatten().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::format("trajectory", "state coordinate outside [0, 1]"));
        }
        Ok(())
    }
}
