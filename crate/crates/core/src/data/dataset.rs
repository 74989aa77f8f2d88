use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::Trajectory;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    /// `(state, subgoal, env action)` tuples.
    Low,
    /// `(state, goal, subgoal)` tuples; the action is itself a state.
    High,
}

/// Index form of a goal tuple.
///
/// The state is `states[t]` and the goal `states[goal_t]`. The action is
/// `actions[t]` at the low level and `states[sub_t]` at the high level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TupleRef {
    pub traj: u32,
    pub t: u32,
    pub goal_t: u32,
    pub sub_t: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Provenance {
    pub trajectory: usize,
    pub t: usize,
    pub w: usize,
}

/// A materialised `(state, goal, action)` record.
#[derive(Clone, Debug, PartialEq)]
pub struct GoalTuple {
    pub state: Vec<f64>,
    pub goal: Vec<f64>,
    pub action: Vec<f64>,
    pub provenance: Provenance,
}

/// `sum_{t=0}^{T-1} min(window, T - t)` for one trajectory of `horizon` steps.
pub(crate) fn window_count(horizon: usize, window: usize) -> usize {
    if horizon <= window {
        horizon * (horizon + 1) / 2
    } else {
        window * (window + 1) / 2 + (horizon - window) * window
    }
}

/// A run of tuples. Windowed runs are stored by their parameters so that
/// relabeled buffers cost a few words per trajectory.
#[derive(Clone, Debug)]
enum Block {
    Refs(Vec<TupleRef>),
    /// Every `(t, w)` with `1 <= w <= min(window, horizon - t)`, ordered by
    /// `t` then `w`; the subgoal lies `min(w, clip)` steps ahead.
    Window {
        traj: u32,
        horizon: u32,
        window: u32,
        clip: u32,
    },
}

impl Block {
    fn len(&self) -> usize {
        match self {
            Block::Refs(r) => r.len(),
            Block::Window { horizon, window, .. } => window_count(*horizon as usize, *window as usize),
        }
    }

    fn get(&self, k: usize) -> TupleRef {
        match *self {
            Block::Refs(ref r) => r[k],
            Block::Window {
                traj,
                horizon,
                window,
                clip,
            } => {
                let (h, w) = (horizon as usize, window as usize);
                // rows with a full window come first, then a shrinking tail
                let full = if h >= w { h - w + 1 } else { 0 };
                let (t, step) = if k < full * w {
                    (k / w, k % w + 1)
                } else {
                    let mut rest = k - full * w;
                    let mut t = full;
                    let mut row = h - t;
                    while rest >= row {
                        rest -= row;
                        t += 1;
                        row -= 1;
                    }
                    (t, rest + 1)
                };
                TupleRef {
                    traj,
                    t: t as u32,
                    goal_t: (t + step) as u32,
                    sub_t: (t + step.min(clip as usize)) as u32,
                }
            }
        }
    }

    fn shifted(&self, offset: u32) -> Block {
        match self {
            Block::Refs(r) => Block::Refs(
                r.iter()
                    .map(|x| TupleRef {
                        traj: x.traj + offset,
                        ..*x
                    })
                    .collect(),
            ),
            Block::Window {
                traj,
                horizon,
                window,
                clip,
            } => Block::Window {
                traj: traj + offset,
                horizon: *horizon,
                window: *window,
                clip: *clip,
            },
        }
    }
}

/// Homogeneous, append-only collection of goal tuples over a trajectory pool.
#[derive(Clone, Debug)]
pub struct Dataset {
    level: Level,
    pool: Vec<Arc<Trajectory>>,
    blocks: Vec<Block>,
    /// Cumulative tuple count at the end of each block.
    ends: Vec<usize>,
}

impl Dataset {
    pub fn new(level: Level, pool: Vec<Arc<Trajectory>>) -> Self {
        Self {
            level,
            pool,
            blocks: Vec::new(),
            ends: Vec::new(),
        }
    }

    /// Build from explicit references, checking every index.
    pub fn from_refs(level: Level, pool: Vec<Arc<Trajectory>>, refs: Vec<TupleRef>) -> Result<Self> {
        let mut ds = Self::new(level, pool);
        for (i, r) in refs.iter().enumerate() {
            ds.check_ref(r)
                .map_err(|detail| Error::format("dataset", format!("tuple {i}: {detail}")))?;
        }
        if !refs.is_empty() {
            ds.push_block(Block::Refs(refs));
        }
        Ok(ds)
    }

    fn check_ref(&self, r: &TupleRef) -> std::result::Result<(), String> {
        let traj = self
            .pool
            .get(r.traj as usize)
            .ok_or_else(|| format!("trajectory {} out of range", r.traj))?;
        let horizon = traj.len() as u32;
        if r.t >= horizon || r.goal_t > horizon || r.sub_t > horizon {
            return Err(format!("index beyond trajectory length {horizon}"));
        }
        if r.goal_t <= r.t || r.sub_t < r.t {
            return Err("goal must lie strictly after the state".into());
        }
        Ok(())
    }

    fn push_block(&mut self, block: Block) {
        let end = self.len() + block.len();
        self.blocks.push(block);
        self.ends.push(end);
    }

    pub(crate) fn push(&mut self, r: TupleRef) {
        debug_assert!(self.check_ref(&r).is_ok());
        match self.blocks.last_mut() {
            Some(Block::Refs(refs)) => {
                refs.push(r);
                *self.ends.last_mut().unwrap() += 1;
            }
            _ => self.push_block(Block::Refs(vec![r])),
        }
    }

    /// Add every windowed tuple of pool trajectory `traj`, with subgoals
    /// clipped to `clip` steps ahead.
    pub(crate) fn push_window(&mut self, traj: u32, window: usize, clip: usize) {
        let horizon = self.pool[traj as usize].len();
        if horizon == 0 || window == 0 {
            return;
        }
        self.push_block(Block::Window {
            traj,
            horizon: horizon as u32,
            window: window as u32,
            clip: clip as u32,
        });
    }

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn len(&self) -> usize {
        self.ends.last().copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pool(&self) -> &[Arc<Trajectory>] {
        &self.pool
    }

    /// Reference of tuple `i`. Panics when `i` is out of range.
    pub fn tuple_ref(&self, i: usize) -> TupleRef {
        assert!(i < self.len(), "tuple {i} out of range for {} tuples", self.len());
        let b = self.ends.partition_point(|&e| e <= i);
        let start = if b == 0 { 0 } else { self.ends[b - 1] };
        self.blocks[b].get(i - start)
    }

    /// All references in order.
    pub fn refs(&self) -> impl Iterator<Item = TupleRef> + '_ {
        self.blocks.iter().flat_map(|b| (0..b.len()).map(move |k| b.get(k)))
    }

    pub fn state(&self, i: usize) -> &[f64] {
        let r = self.tuple_ref(i);
        &self.pool[r.traj as usize].states[r.t as usize]
    }

    pub fn goal(&self, i: usize) -> &[f64] {
        let r = self.tuple_ref(i);
        &self.pool[r.traj as usize].states[r.goal_t as usize]
    }

    pub fn action(&self, i: usize) -> &[f64] {
        let r = self.tuple_ref(i);
        let traj = &self.pool[r.traj as usize];
        match self.level {
            Level::Low => &traj.actions[r.t as usize],
            Level::High => &traj.states[r.sub_t as usize],
        }
    }

    pub fn tuple(&self, i: usize) -> GoalTuple {
        let r = self.tuple_ref(i);
        let traj = &self.pool[r.traj as usize];
        GoalTuple {
            state: traj.states[r.t as usize].clone(),
            goal: traj.states[r.goal_t as usize].clone(),
            action: match self.level {
                Level::Low => traj.actions[r.t as usize].clone(),
                Level::High => traj.states[r.sub_t as usize].clone(),
            },
            provenance: Provenance {
                trajectory: r.traj as usize,
                t: r.t as usize,
                w: (r.goal_t - r.t) as usize,
            },
        }
    }

    pub fn action_dim(&self) -> Option<usize> {
        (!self.is_empty()).then(|| self.action(0).len())
    }

    /// Append another dataset of the same level, re-indexing its pool.
    pub fn append(&mut self, other: &Dataset) -> Result<()> {
        if other.level != self.level {
            return Err(Error::InvalidConfig(format!(
                "cannot append {:?} tuples to a {:?} dataset",
                other.level, self.level
            )));
        }
        let offset = self.pool.len() as u32;
        self.pool.extend(other.pool.iter().cloned());
        for b in &other.blocks {
            self.push_block(b.shifted(offset));
        }
        Ok(())
    }
}
