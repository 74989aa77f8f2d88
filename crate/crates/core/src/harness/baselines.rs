//! Non-learned baselines.

use crate::data::Trajectory;
use crate::error::{Error, Result};

/// Index of the demonstration whose final state is closest to `goal` in
/// Euclidean distance; ties go to the lowest index.
pub fn nearest_demo(demos: &[Trajectory], goal: &[f64]) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, d) in demos.iter().enumerate() {
        let fin = d.final_state();
        if fin.len() != goal.len() {
            return Err(Error::DimensionMismatch {
                context: "nearest-neighbor goal",
                expected: fin.len(),
                got: goal.len(),
            });
        }
        let dist = fin.iter().zip(goal).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        if best.is_none_or(|(_, b)| dist < b) {
            best = Some((i, dist));
        }
    }
    best.map(|(i, _)| i).ok_or(Error::Empty("demonstrations"))
}

/// Open-loop nearest-neighbor policy: the action sequence of the
/// demonstration that ends closest to `goal`.
pub fn nearest_neighbor_policy(demos: &[Trajectory], goal: &[f64]) -> Result<Vec<Vec<f64>>> {
    Ok(demos[nearest_demo(demos, goal)?].actions.clone())
}
