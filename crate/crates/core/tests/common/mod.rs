//! Test-only oracles, written independently of the library's batched paths.
#![allow(dead_code)]

use std::sync::Arc;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use relay::data::{relabel_high, relabel_low, Dataset, RelabelConfig};
use relay::env::{sample_compound_goals, scripted_demo, CompoundGoal, EnvConfig, EnvSpec};
use relay::finetune::{FinetuneConfig, RewardConfig, RewardKind, Variant};
use relay::policy::{ExecutorConfig, MlpShape, PolicyParams, Standardizer};
use relay::seed;

/// Plain-loop MLP forward over the documented flat layout.
pub fn naive_mean(shape: &MlpShape, values: &[f64], std: &Standardizer, input: &[f64]) -> Vec<f64> {
    let mut x: Vec<f64> = input
        .iter()
        .enumerate()
        .map(|(k, v)| (v - std.mean[k]) / std.scale[k])
        .collect();
    let layers = shape.layers();
    let mut off = 0;
    for (l, &(fan_in, fan_out)) in layers.iter().enumerate() {
        let w = &values[off..off + fan_in * fan_out];
        off += fan_in * fan_out;
        let b = &values[off..off + fan_out];
        off += fan_out;
        let mut y = vec![0.0; fan_out];
        for o in 0..fan_out {
            let mut acc = b[o];
            for i in 0..fan_in {
                acc += w[o * fan_in + i] * x[i];
            }
            y[o] = if l + 1 < layers.len() { acc.max(0.0) } else { acc };
        }
        x = y;
    }
    x
}

/// Log of a product of univariate normal densities.
pub fn naive_log_density(shape: &MlpShape, values: &[f64], std: &Standardizer, input: &[f64], action: &[f64]) -> f64 {
    let mean = naive_mean(shape, values, std, input);
    let log_std = &values[values.len() - shape.output_dim..];
    let mut density = 1.0f64;
    let mut log_acc = 0.0;
    for k in 0..mean.len() {
        let sigma = log_std[k].exp();
        let z = (action[k] - mean[k]) / sigma;
        let pdf = (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
        // keep the product in range by folding into logs per factor
        density *= pdf;
        if density < 1e-200 || density > 1e200 {
            log_acc += density.ln();
            density = 1.0;
        }
    }
    log_acc + density.ln()
}

/// Central finite-difference gradient of the naive log density.
pub fn fd_grad(
    shape: &MlpShape,
    values: &[f64],
    std: &Standardizer,
    input: &[f64],
    action: &[f64],
    h: f64,
) -> Vec<f64> {
    let mut v = values.to_vec();
    (0..values.len())
        .map(|k| {
            let orig = v[k];
            v[k] = orig + h;
            let up = naive_log_density(shape, &v, std, input, action);
            v[k] = orig - h;
            let down = naive_log_density(shape, &v, std, input, action);
            v[k] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// A randomised policy with O(1) weights and a random standardiser.
pub fn random_policy(shape: MlpShape, seed_value: u64) -> PolicyParams {
    let mut rng = seed::rng(seed_value, &[991]);
    let dim = shape.input_dim;
    let std = Standardizer {
        mean: (0..dim).map(|_| rng.random_range(-0.5..0.5)).collect(),
        scale: (0..dim).map(|_| rng.random_range(0.5..2.0)).collect(),
    };
    let base = PolicyParams::init(shape.clone(), std.clone(), &mut rng).unwrap();
    let normal = Normal::new(0.0, 0.6).unwrap();
    let n = base.num_params();
    let values: Vec<f64> = (0..n)
        .map(|k| {
            if k >= n - shape.output_dim {
                rng.random_range(-1.0..0.5)
            } else {
                normal.sample(&mut rng)
            }
        })
        .collect();
    PolicyParams::from_parts(shape, values, std).unwrap()
}

pub fn random_vec(rng: &mut impl Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

/// Max over components of |a - b| / max(|a|, |b|, floor).
pub fn max_rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Goal-reaching rewards written from their definitions: `kind` is one of
/// "sparse", "euclidean" or "elementwise"; `blocks` lists the coordinates of
/// each element for the elementwise case.
pub fn oracle_reward(kind: &str, eps: f64, blocks: &[Vec<usize>], s: &[f64], g: &[f64]) -> f64 {
    let dist = |idx: &[usize]| {
        let mut acc = 0.0;
        for &i in idx {
            acc += (s[i] - g[i]) * (s[i] - g[i]);
        }
        acc.sqrt()
    };
    let all: Vec<usize> = (0..s.len()).collect();
    match kind {
        "sparse" => {
            if dist(&all) < eps {
                1.0
            } else {
                0.0
            }
        }
        "euclidean" => -dist(&all),
        "elementwise" => blocks.iter().filter(|b| dist(b) < eps).count() as f64,
        other => panic!("unknown reward kind {other}"),
    }
}

/// `sum_{t=0}^{T-1} min(window, T - t)` by direct enumeration.
pub fn oracle_relabel_count(lengths: &[usize], window: usize) -> usize {
    let mut n = 0;
    for &len in lengths {
        for t in 0..len {
            for w in 1..=window {
                if t + w <= len {
                    n += 1;
                }
            }
        }
    }
    n
}

pub fn random_batch(policy: &PolicyParams, n: usize, seed_value: u64) -> (Array2<f64>, Array2<f64>, Vec<f64>) {
    let mut rng = seed::rng(seed_value, &[77]);
    let x = Array2::from_shape_fn((n, policy.shape().input_dim), |_| rng.random_range(-1.0..1.0));
    let a = Array2::from_shape_fn((n, policy.output_dim()), |_| rng.random_range(-1.0..1.0));
    let adv = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    (x, a, adv)
}

/// Per-sample scores through the single-sample gradient entry point.
pub fn per_sample_scores(policy: &PolicyParams, x: &Array2<f64>, a: &Array2<f64>) -> Vec<Vec<f64>> {
    let half = policy.state_dim();
    (0..x.nrows())
        .map(|i| {
            let row = x.row(i).to_vec();
            policy
                .grad_log_prob(&row[..half], &row[half..], a.row(i).as_slice().unwrap())
                .unwrap()
        })
        .collect()
}

pub struct Smoke {
    pub spec: EnvSpec,
    pub goal: CompoundGoal,
    pub exec: ExecutorConfig,
    pub relabel: RelabelConfig,
    pub high: PolicyParams,
    pub low: PolicyParams,
    pub d_low: Dataset,
    pub d_high: Dataset,
}

pub fn smoke() -> Smoke {
    let spec = EnvSpec::new(&EnvConfig::default()).unwrap();
    let goal = sample_compound_goals(&spec, 1, 5).unwrap().remove(0);
    let demos: Vec<_> = (0..3)
        .map(|i| Arc::new(scripted_demo(&spec, &goal, 0.01, i).unwrap()))
        .collect();
    let relabel = RelabelConfig {
        low_window: 10,
        high_window: 40,
    };
    let d = spec.state_dim();
    let mut rng = seed::rng(3, &[0]);
    let low = PolicyParams::init(MlpShape::new(2 * d, &[8], 3), Standardizer::identity(2 * d), &mut rng).unwrap();
    let high = PolicyParams::init(MlpShape::new(2 * d, &[8], d), Standardizer::identity(2 * d), &mut rng).unwrap();
    Smoke {
        d_low: relabel_low(&demos, &relabel).unwrap(),
        d_high: relabel_high(&demos, &relabel).unwrap(),
        spec,
        goal,
        exec: ExecutorConfig {
            horizon: 10,
            episode_length: 40,
            deterministic: false,
            workers: 1,
        },
        relabel,
        high,
        low,
    }
}

pub fn smoke_config(variant: Variant, iterations: usize) -> FinetuneConfig {
    FinetuneConfig {
        trajectories_per_iter: 6,
        iterations,
        variant,
        finetune_high: true,
        demo_samples: 64,
        lambda_low: 0.1,
        lambda_high: 0.1,
        reward: RewardConfig {
            kind: RewardKind::Euclidean,
            ..Default::default()
        },
        ..Default::default()
    }
}
