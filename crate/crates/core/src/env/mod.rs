//! Deterministic desk-kitchen environment.
//!
//! A planar effector moves over the unit square. Each of the `M` scene
//! elements sits at a fixed site and carries a single joint in `[0, 1]`.
//! Applying effort while the effector is inside an element's interaction
//! radius drives that element's joint; nothing else ever changes a joint.
//! The state vector is `[effector_x, effector_y, joint_0, .., joint_{M-1}]`.

mod demo;
mod goals;

pub use demo::{scripted_demo, DEMO_NOISE_SCALE, SETTLE_FRACTION};
pub use goals::{all_compound_goals, sample_compound_goals, step_completion, CompoundGoal, GOAL_ELEMENTS};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Number of effector coordinates at the front of every state vector.
pub const EFFECTOR_DIM: usize = 2;
/// Environment action dimension: two effector velocities and one effort.
pub const ACTION_DIM: usize = 3;

/// User-facing environment settings as they appear in a run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub num_elements: usize,
    pub interaction_radius: f64,
    pub max_effector_speed: f64,
    pub manipulation_gain: f64,
    pub episode_length: usize,
    pub completion_tolerance: f64,
    /// Seed for the element layout when `element_sites` is not given.
    pub layout_seed: u64,
    pub element_sites: Option<Vec<[f64; 2]>>,
    /// Initial effector positions are drawn uniformly from `[lo, hi]^2`.
    pub start_box: [f64; 2],
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            num_elements: 7,
            interaction_radius: 0.15,
            max_effector_speed: 0.05,
            manipulation_gain: 0.05,
            episode_length: 280,
            completion_tolerance: 0.1,
            layout_seed: 0,
            element_sites: None,
            start_box: [0.0, 1.0],
        }
    }
}

/// Validated, immutable environment description.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnvSpec {
    num_elements: usize,
    element_sites: Vec<[f64; 2]>,
    interaction_radius: f64,
    max_effector_speed: f64,
    manipulation_gain: f64,
    episode_length: usize,
    completion_tolerance: f64,
    start_box: [f64; 2],
}

const SITE_MARGIN: f64 = 0.1;

fn sample_layout(count: usize, min_dist: f64, layout_seed: u64) -> Result<Vec<[f64; 2]>> {
    let mut rng = seed::rng(layout_seed, &[seed::stream::LAYOUT]);
    for _restart in 0..1000 {
        let mut sites: Vec<[f64; 2]> = Vec::with_capacity(count);
        let mut tries = 0;
        while sites.len() < count && tries < 20_000 {
            tries += 1;
            let p = [
                rng.random_range(SITE_MARGIN..1.0 - SITE_MARGIN),
                rng.random_range(SITE_MARGIN..1.0 - SITE_MARGIN),
            ];
            if sites.iter().all(|q| site_dist(&p, q) > min_dist) {
                sites.push(p);
            }
        }
        if sites.len() == count {
            return Ok(sites);
        }
    }
    Err(Error::InvalidConfig(format!(
        "could not place {count} sites with pairwise distance > {min_dist}"
    )))
}

fn site_dist(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

impl EnvSpec {
    pub fn new(cfg: &EnvConfig) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if cfg.num_elements < GOAL_ELEMENTS {
            return bad(format!(
                "env.num_elements must be at least {GOAL_ELEMENTS}, got {}",
                cfg.num_elements
            ));
        }
        for (name, v) in [
            ("interaction_radius", cfg.interaction_radius),
            ("max_effector_speed", cfg.max_effector_speed),
            ("manipulation_gain", cfg.manipulation_gain),
            ("completion_tolerance", cfg.completion_tolerance),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("env.{name} must be positive, got {v}"));
            }
        }
        if cfg.episode_length == 0 {
            return bad("env.episode_length must be positive".into());
        }
        let [lo, hi] = cfg.start_box;
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
            return bad(format!("env.start_box must satisfy 0 <= lo <= hi <= 1, got {lo}, {hi}"));
        }
        let min_dist = 2.0 * cfg.interaction_radius;
        let sites = match &cfg.element_sites {
            Some(sites) => {
                if sites.len() != cfg.num_elements {
                    return bad(format!(
                        "env.element_sites has {} entries, expected {}",
                        sites.len(),
                        cfg.num_elements
                    ));
                }
                for (i, p) in sites.iter().enumerate() {
                    if !p.iter().all(|c| (0.0..=1.0).contains(c)) {
                        return bad(format!("env.element_sites[{i}] lies outside the unit square"));
                    }
                    for (j, q) in sites.iter().enumerate().skip(i + 1) {
                        if site_dist(p, q) <= min_dist {
                            return bad(format!(
                                "env.element_sites[{i}] and [{j}] are closer than twice the interaction radius"
                            ));
                        }
                    }
                }
                sites.clone()
            }
            None => sample_layout(cfg.num_elements, min_dist, cfg.layout_seed)?,
        };
        Ok(Self {
            num_elements: cfg.num_elements,
            element_sites: sites,
            interaction_radius: cfg.interaction_radius,
            max_effector_speed: cfg.max_effector_speed,
            manipulation_gain: cfg.manipulation_gain,
            episode_length: cfg.episode_length,
            completion_tolerance: cfg.completion_tolerance,
            start_box: cfg.start_box,
        })
    }

    /// The configuration that reproduces this spec exactly, sites included.
    pub fn to_config(&self) -> EnvConfig {
        EnvConfig {
            num_elements: self.num_elements,
            interaction_radius: self.interaction_radius,
            max_effector_speed: self.max_effector_speed,
            manipulation_gain: self.manipulation_gain,
            episode_length: self.episode_length,
            completion_tolerance: self.completion_tolerance,
            layout_seed: 0,
            element_sites: Some(self.element_sites.clone()),
            start_box: self.start_box,
        }
    }

    pub fn num_elements(&self) -> usize {
        self.num_elements
    }

    pub fn element_sites(&self) -> &[[f64; 2]] {
        &self.element_sites
    }

    pub fn interaction_radius(&self) -> f64 {
        self.interaction_radius
    }

    pub fn max_effector_speed(&self) -> f64 {
        self.max_effector_speed
    }

    pub fn manipulation_gain(&self) -> f64 {
        self.manipulation_gain
    }

    pub fn episode_length(&self) -> usize {
        self.episode_length
    }

    pub fn completion_tolerance(&self) -> f64 {
        self.completion_tolerance
    }

    pub fn state_dim(&self) -> usize {
        EFFECTOR_DIM + self.num_elements
    }

    /// State-vector indices of the element joints.
    pub fn element_indices(&self) -> std::ops::Range<usize> {
        EFFECTOR_DIM..EFFECTOR_DIM + self.num_elements
    }

    /// Element whose interaction zone contains `effector`, if any.
    pub fn element_at(&self, effector: &[f64; 2]) -> Option<usize> {
        self.element_sites
            .iter()
            .position(|site| site_dist(effector, site) < self.interaction_radius)
    }

    /// Draw an initial state: effector uniform in the start box, joints at rest.
    pub fn initial_state<R: Rng>(&self, rng: &mut R) -> EnvState {
        let [lo, hi] = self.start_box;
        let mut draw = || if hi > lo { rng.random_range(lo..hi) } else { lo };
        EnvState {
            effector: [draw(), draw()],
            joints: vec![0.0; self.num_elements],
            t: 0,
        }
    }

    /// Advance one step. Pure and total: every input is clamped.
    pub fn step(&self, state: &EnvState, action: &Action) -> EnvState {
        let action = action.clamped(self.max_effector_speed);
        let mut joints = state.joints.clone();
        if let Some(j) = self.element_at(&state.effector) {
            joints[j] = (joints[j] + self.manipulation_gain * action.effort).clamp(0.0, 1.0);
        }
        EnvState {
            effector: [
                (state.effector[0] + action.delta[0]).clamp(0.0, 1.0),
                (state.effector[1] + action.delta[1]).clamp(0.0, 1.0),
            ],
            joints,
            t: state.t + 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvState {
    pub effector: [f64; 2],
    pub joints: Vec<f64>,
    pub t: usize,
}

impl EnvState {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(EFFECTOR_DIM + self.joints.len());
        v.extend_from_slice(&self.effector);
        v.extend_from_slice(&self.joints);
        v
    }

    /// Rebuild a state from its vector form, clamping every coordinate.
    pub fn from_slice(v: &[f64], t: usize) -> Result<Self> {
        if v.len() <= EFFECTOR_DIM {
            return Err(Error::DimensionMismatch {
                context: "state vector",
                expected: EFFECTOR_DIM + 1,
                got: v.len(),
            });
        }
        Ok(Self {
            effector: [v[0].clamp(0.0, 1.0), v[1].clamp(0.0, 1.0)],
            joints: v[EFFECTOR_DIM..].iter().map(|x| x.clamp(0.0, 1.0)).collect(),
            t,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Action {
    pub delta: [f64; 2],
    pub effort: f64,
}

impl Action {
    pub fn new(dx: f64, dy: f64, effort: f64) -> Self {
        Self {
            delta: [dx, dy],
            effort,
        }
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        match v {
            [dx, dy, u] => Ok(Self::new(*dx, *dy, *u)),
            _ => Err(Error::DimensionMismatch {
                context: "action vector",
                expected: ACTION_DIM,
                got: v.len(),
            }),
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.delta[0], self.delta[1], self.effort]
    }

    /// Clamp to the admissible box; NaN components become zero.
    pub fn clamped(&self, max_speed: f64) -> Self {
        let c = |x: f64, lim: f64| if x.is_nan() { 0.0 } else { x.clamp(-lim, lim) };
        Self {
            delta: [c(self.delta[0], max_speed), c(self.delta[1], max_speed)],
            effort: c(self.effort, 1.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> EnvSpec {
        EnvSpec::new(&EnvConfig::default()).unwrap()
    }

    #[test]
    fn default_layout_respects_separation() {
        let s = spec();
        assert_eq!(s.element_sites().len(), 7);
        for (i, p) in s.element_sites().iter().enumerate() {
            for q in &s.element_sites()[i + 1..] {
                assert!(site_dist(p, q) > 2.0 * s.interaction_radius());
            }
        }
        assert_eq!(s, spec());
    }

    #[test]
    fn far_from_sites_joints_unchanged() {
        let s = spec();
        // find a point outside every zone
        let mut far = None;
        'outer: for i in 0..=20 {
            for j in 0..=20 {
                let p = [i as f64 / 20.0, j as f64 / 20.0];
                if s.element_at(&p).is_none() {
                    far = Some(p);
                    break 'outer;
                }
            }
        }
        let state = EnvState {
            effector: far.unwrap(),
            joints: vec![0.3; 7],
            t: 0,
        };
        for u in [-1.0, 0.0, 1.0] {
            let next = s.step(&state, &Action::new(0.0, 0.0, u));
            assert_eq!(next.joints, state.joints);
            assert_eq!(next.t, 1);
        }
    }

    #[test]
    fn effort_at_site_moves_only_that_joint() {
        let s = spec();
        let state = EnvState {
            effector: s.element_sites()[0],
            joints: vec![0.0; 7],
            t: 0,
        };
        let next = s.step(&state, &Action::new(0.0, 0.0, 1.0));
        assert_eq!(next.joints[0], 0.05);
        assert!(next.joints[1..].iter().all(|&j| j == 0.0));
    }

    #[test]
    fn actions_are_clamped_on_ingestion() {
        let s = spec();
        let state = EnvState {
            effector: [0.99, 0.01],
            joints: vec![0.0; 7],
            t: 3,
        };
        let next = s.step(&state, &Action::new(5.0, -5.0, f64::NAN));
        assert_eq!(next.effector, [1.0, 0.0]);
        let next = s.step(
            &EnvState {
                effector: [0.5, 0.5],
                ..state
            },
            &Action::new(5.0, -5.0, 0.0),
        );
        assert_eq!(next.effector, [0.55, 0.45]);
    }

    #[test]
    fn rejects_crowded_sites() {
        let cfg = EnvConfig {
            num_elements: 4,
            element_sites: Some(vec![[0.1, 0.1], [0.2, 0.1], [0.9, 0.9], [0.5, 0.5]]),
            ..EnvConfig::default()
        };
        assert!(matches!(EnvSpec::new(&cfg), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn config_round_trip_reproduces_spec() {
        let s = spec();
        assert_eq!(EnvSpec::new(&s.to_config()).unwrap(), s);
    }
}
