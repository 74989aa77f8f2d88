//! Trajectories and relay relabeling.
//!
//! A [`Dataset`] never copies state vectors: each tuple is a [`TupleRef`]
//! into a shared pool of trajectories, and the state, goal and action fields
//! are read back through the reference. Provenance is therefore exact by
//! construction.

mod dataset;
pub mod io;
mod relabel;
mod segment;
mod trajectory;

pub use dataset::{Dataset, GoalTuple, Level, Provenance, TupleRef};
pub use relabel::{relabel_count, relabel_flat, relabel_high, relabel_low, RelabelConfig, Window};
pub use segment::{oracle_datasets, oracle_segment, segments_to_datasets};
pub use trajectory::{Source, Trajectory, TrajectoryMeta};
