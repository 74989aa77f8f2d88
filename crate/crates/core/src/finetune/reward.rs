//! Goal-reaching rewards.

use serde::{Deserialize, Serialize};

use crate::env::EFFECTOR_DIM;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardKind {
    /// `1(|s - g| < eps)`.
    Sparse,
    /// `-|s - g|`.
    Euclidean,
    /// Number of element blocks with `|s[idx] - g[idx]| < eps`.
    ElementwiseSparse,
}

impl RewardKind {
    pub fn label(self) -> &'static str {
        match self {
            RewardKind::Sparse => "sparse",
            RewardKind::Euclidean => "euclidean",
            RewardKind::ElementwiseSparse => "elementwise_sparse",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub kind: RewardKind,
    pub epsilon: f64,
    /// State indices of each scene element. Omitted: every joint coordinate
    /// is its own element.
    pub element_indices: Option<Vec<Vec<usize>>>,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            kind: RewardKind::Sparse,
            epsilon: 0.1,
            element_indices: None,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig("finetune.reward.epsilon must be positive".into()));
        }
        if let Some(sets) = &self.element_indices {
            let mut seen = std::collections::HashSet::new();
            for idx in sets.iter().flatten() {
                if *idx < EFFECTOR_DIM {
                    return Err(Error::InvalidConfig(format!(
                        "finetune.reward.element_indices: index {idx} refers to the effector"
                    )));
                }
                if !seen.insert(*idx) {
                    return Err(Error::InvalidConfig(format!(
                        "finetune.reward.element_indices: index {idx} appears in two elements"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn norm_diff(s: &[f64], g: &[f64], idx: impl Iterator<Item = usize>) -> f64 {
    idx.map(|i| (s[i] - g[i]).powi(2)).sum::<f64>().sqrt()
}

/// Reward of being in state `s` when asked for goal `g`.
pub fn reward(cfg: &RewardConfig, s: &[f64], g: &[f64]) -> Result<f64> {
    if s.len() != g.len() {
        return Err(Error::DimensionMismatch {
            context: "reward goal",
            expected: s.len(),
            got: g.len(),
        });
    }
    Ok(match cfg.kind {
        RewardKind::Sparse => {
            if norm_diff(s, g, 0..s.len()) < cfg.epsilon {
                1.0
            } else {
                0.0
            }
        }
        RewardKind::Euclidean => -norm_diff(s, g, 0..s.len()),
        RewardKind::ElementwiseSparse => match &cfg.element_indices {
            Some(sets) => {
                let mut hits = 0;
                for set in sets {
                    if let Some(&bad) = set.iter().find(|&&i| i >= s.len()) {
                        return Err(Error::DimensionMismatch {
                            context: "reward element index",
                            expected: s.len(),
                            got: bad + 1,
                        });
                    }
                    if norm_diff(s, g, set.iter().copied()) < cfg.epsilon {
                        hits += 1;
                    }
                }
                hits as f64
            }
            None => (EFFECTOR_DIM..s.len())
                .filter(|&i| (s[i] - g[i]).abs() < cfg.epsilon)
                .count() as f64,
        },
    })
}
