//! Relay data relabeling.
//!
//! Every state reached within a window after `s_t` is treated as a goal that
//! taking `a_t` from `s_t` leads to. Windows are clipped at the end of the
//! trajectory: goals beyond the final state are never fabricated.

use std::sync::Arc;

use log::warn;
use serde::{Deserialize, Serialize};

use super::{Dataset, Level, Trajectory, TupleRef};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelabelConfig {
    pub low_window: usize,
    pub high_window: usize,
}

impl Default for RelabelConfig {
    fn default() -> Self {
        Self {
            low_window: 30,
            high_window: 260,
        }
    }
}

impl RelabelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.low_window == 0 || self.low_window > self.high_window {
            return Err(Error::InvalidConfig(format!(
                "relabel.low_window must satisfy 1 <= low_window <= high_window, got {} and {}",
                self.low_window, self.high_window
            )));
        }
        Ok(())
    }
}

/// Goal window for flat relabeling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    /// Every state up to this many steps ahead.
    Steps(usize),
    /// Only the trajectory's final state.
    Final,
}

/// Closed form of `sum_{t=0}^{T-1} min(window, T - t)` summed over lengths.
pub fn relabel_count(lengths: impl IntoIterator<Item = usize>, window: usize) -> usize {
    lengths
        .into_iter()
        .map(|t| {
            if t <= window {
                t * (t + 1) / 2
            } else {
                window * (window + 1) / 2 + (t - window) * window
            }
        })
        .sum()
}

fn check_input(trajs: &[Arc<Trajectory>]) -> Result<()> {
    if trajs.is_empty() {
        return Err(Error::Empty("no trajectories to relabel"));
    }
    Ok(())
}

fn push_windows(ds: &mut Dataset, window: usize, clip: usize) {
    for n in 0..ds.pool().len() {
        if ds.pool()[n].is_empty() {
            warn!("skipping trajectory {n} with no actions");
            continue;
        }
        ds.push_window(n as u32, window, clip);
    }
}

/// Low-level relabeling: `(s_t, s_{t+w}, a_t)` for `w` in `1..=W_l`.
pub fn relabel_low(trajs: &[Arc<Trajectory>], cfg: &RelabelConfig) -> Result<Dataset> {
    cfg.validate()?;
    relabel_flat(trajs, Window::Steps(cfg.low_window))
}

/// High-level relabeling: `(s_t, s_{t+w})` with subgoal `s_{t+min(w, W_l)}`
/// for `w` in `1..=W_h`.
pub fn relabel_high(trajs: &[Arc<Trajectory>], cfg: &RelabelConfig) -> Result<Dataset> {
    cfg.validate()?;
    check_input(trajs)?;
    let mut ds = Dataset::new(Level::High, trajs.to_vec());
    push_windows(&mut ds, cfg.high_window, cfg.low_window);
    Ok(ds)
}

/// Flat goal-conditioned relabeling used by the behaviour-cloning baselines.
pub fn relabel_flat(trajs: &[Arc<Trajectory>], window: Window) -> Result<Dataset> {
    check_input(trajs)?;
    let mut ds = Dataset::new(Level::Low, trajs.to_vec());
    match window {
        Window::Steps(0) => return Err(Error::InvalidConfig("relabel window must be at least 1".into())),
        Window::Steps(width) => push_windows(&mut ds, width, 0),
        Window::Final => {
            for (n, traj) in trajs.iter().enumerate() {
                let horizon = traj.len();
                if horizon == 0 {
                    warn!("skipping trajectory {n} with no actions");
                }
                for t in 0..horizon {
                    ds.push(TupleRef {
                        traj: n as u32,
                        t: t as u32,
                        goal_t: horizon as u32,
                        sub_t: t as u32,
                    });
                }
            }
        }
    }
    Ok(ds)
}
