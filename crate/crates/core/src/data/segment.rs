//! Oracle segmentation baseline: split demonstrations wherever a scene
//! element's joint has moved more than a threshold since the segment began.

use std::sync::Arc;

use super::{Dataset, Level, Trajectory, TupleRef};
use crate::env::EFFECTOR_DIM;
use crate::error::{Error, Result};

/// Segment boundaries `0 = b_0 < b_1 < .. < b_k = T`.
pub fn oracle_segment(traj: &Trajectory, threshold: f64) -> Result<Vec<usize>> {
    if traj.is_empty() {
        return Err(Error::Empty("cannot segment a trajectory with no actions"));
    }
    let horizon = traj.len();
    let mut bounds = vec![0];
    let mut start = &traj.states[0];
    for (k, s) in traj.states.iter().enumerate().skip(1) {
        let moved = s[EFFECTOR_DIM..]
            .iter()
            .zip(&start[EFFECTOR_DIM..])
            .any(|(a, b)| (a - b).abs() > threshold);
        if moved {
            bounds.push(k);
            start = s;
        }
    }
    if *bounds.last().unwrap() != horizon {
        bounds.push(horizon);
    }
    Ok(bounds)
}

/// Turn segment boundaries into low- and high-level datasets.
///
/// Low level: `(s_t, s_end, a_t)` for every step of a segment. High level:
/// from each segment start, the subgoal is the segment end and the goal is
/// every later boundary state, the final state included. Zero-length
/// segments are skipped.
pub fn segments_to_datasets(traj: &Arc<Trajectory>, boundaries: &[usize]) -> Result<(Dataset, Dataset)> {
    let horizon = traj.len();
    let valid = boundaries.first() == Some(&0)
        && boundaries.last() == Some(&horizon)
        && boundaries.windows(2).all(|w| w[0] <= w[1]);
    if !valid || horizon == 0 {
        return Err(Error::InvalidConfig(format!(
            "boundaries {boundaries:?} do not partition [0, {horizon}]"
        )));
    }
    let mut bounds = boundaries.to_vec();
    bounds.dedup();
    let pool = vec![traj.clone()];
    let mut low = Dataset::new(Level::Low, pool.clone());
    let mut high = Dataset::new(Level::High, pool);
    for (k, seg) in bounds.windows(2).enumerate() {
        let (start, end) = (seg[0], seg[1]);
        for t in start..end {
            low.push(TupleRef {
                traj: 0,
                t: t as u32,
                goal_t: end as u32,
                sub_t: t as u32,
            });
        }
        for &goal in &bounds[k + 1..] {
            high.push(TupleRef {
                traj: 0,
                t: start as u32,
                goal_t: goal as u32,
                sub_t: end as u32,
            });
        }
    }
    Ok((low, high))
}

/// Segment and relabel a pool of trajectories.
pub fn oracle_datasets(trajs: &[Arc<Trajectory>], threshold: f64) -> Result<(Dataset, Dataset)> {
    if trajs.is_empty() {
        return Err(Error::Empty("no trajectories to segment"));
    }
    let mut low = Dataset::new(Level::Low, Vec::new());
    let mut high = Dataset::new(Level::High, Vec::new());
    for traj in trajs.iter().filter(|t| !t.is_empty()) {
        let bounds = oracle_segment(traj, threshold)?;
        let (l, h) = segments_to_datasets(traj, &bounds)?;
        low.append(&l)?;
        high.append(&h)?;
    }
    Ok((low, high))
}
