use log::{debug, info};
use ndarray::Array2;
use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use super::{Adam, AdamConfig};
use crate::data::{Dataset, Level};
use crate::error::{Error, Result};
use crate::policy::{MlpShape, PolicyParams, Standardizer};
use crate::seed::{self, stream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ILConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Minibatches drawn per epoch without replacement; 0 means a full pass.
    pub batches_per_epoch: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub hidden: Vec<usize>,
    pub seed: u64,
}

impl Default for ILConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            learning_rate: 0.005,
            epochs: 50,
            batches_per_epoch: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            hidden: vec![256, 256],
            seed: 0,
        }
    }
}

impl ILConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("il.batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("il.learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) {
            return Err(Error::InvalidConfig("il.beta1 must lie in [0, 1)".into()));
        }
        if !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::InvalidConfig("il.beta2 must lie in [0, 1)".into()));
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidConfig("il.eps must be positive".into()));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::InvalidConfig(
                "il.hidden needs at least one non-empty layer".into(),
            ));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }
}

/// Seed streams for initialising and shuffling one trained network.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LevelStreams {
    pub init: u64,
    pub shuffle: u64,
}

impl LevelStreams {
    pub const LOW: Self = Self {
        init: stream::INIT_LOW,
        shuffle: stream::SHUFFLE_LOW,
    };
    pub const HIGH: Self = Self {
        init: stream::INIT_HIGH,
        shuffle: stream::SHUFFLE_HIGH,
    };
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// `low`, `high` or `flat`.
    pub level: String,
    /// Mean negative log-likelihood over the epoch's minibatches.
    pub nll: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ILReport {
    pub epochs: Vec<EpochRecord>,
}

impl ILReport {
    pub fn series(&self, level: &str) -> Vec<f64> {
        self.epochs.iter().filter(|r| r.level == level).map(|r| r.nll).collect()
    }
}

fn state_dim(ds: &Dataset) -> Result<usize> {
    if ds.is_empty() {
        return Err(Error::Empty("imitation dataset"));
    }
    Ok(ds.state(0).len())
}

/// Per-dimension statistics of the `[state, goal]` inputs of a dataset.
pub fn fit_standardizer(ds: &Dataset) -> Result<Standardizer> {
    let d = state_dim(ds)?;
    let rows = (0..ds.len()).map(|i| {
        let mut row = Vec::with_capacity(2 * d);
        row.extend_from_slice(ds.state(i));
        row.extend_from_slice(ds.goal(i));
        row
    });
    Ok(Standardizer::fit(2 * d, rows))
}

fn batch(ds: &Dataset, policy: &PolicyParams, idx: &[usize]) -> Result<(Array2<f64>, Array2<f64>)> {
    let x = policy.input_matrix(idx.iter().map(|&i| (ds.state(i), ds.goal(i))))?;
    let out = policy.output_dim();
    let mut a = Array2::zeros((idx.len(), out));
    for (r, &i) in idx.iter().enumerate() {
        let src = ds.action(i);
        if src.len() != out {
            return Err(Error::DimensionMismatch {
                context: "imitation target",
                expected: out,
                got: src.len(),
            });
        }
        a.row_mut(r).as_slice_mut().unwrap().copy_from_slice(src);
    }
    Ok((x, a))
}

/// Minibatch maximum likelihood of `ds`'s actions given state and goal.
///
/// Returns the trained policy and the mean NLL of every epoch. Each epoch
/// either visits a fresh permutation of the whole dataset or, when
/// `batches_per_epoch` is set, draws that many disjoint minibatches.
pub fn train_level(
    ds: &Dataset,
    standardizer: Standardizer,
    cfg: &ILConfig,
    streams: LevelStreams,
) -> Result<(PolicyParams, Vec<f64>)> {
    cfg.validate()?;
    let d = state_dim(ds)?;
    let out = ds.action_dim().ok_or(Error::Empty("imitation dataset"))?;
    let shape = MlpShape::new(2 * d, &cfg.hidden, out);
    let mut policy = PolicyParams::init(shape, standardizer, &mut seed::rng(cfg.seed, &[streams.init]))?;
    let mut adam = Adam::new(cfg.adam(), policy.num_params());
    let n = ds.len();
    let full = n.div_ceil(cfg.batch_size);
    let per_epoch = if cfg.batches_per_epoch == 0 {
        full
    } else {
        cfg.batches_per_epoch.min(full)
    };
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut rng = seed::rng(cfg.seed, &[streams.shuffle, epoch as u64]);
        let order: Vec<usize> = if per_epoch == full {
            let mut all: Vec<usize> = (0..n).collect();
            all.shuffle(&mut rng);
            all
        } else {
            index::sample(&mut rng, n, per_epoch * cfg.batch_size).into_vec()
        };
        let mut total = 0.0;
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            let (x, a) = batch(ds, &policy, idx)?;
            let scores = policy.score_batch(x.view(), a.view())?;
            let nll = -scores.log_probs().mean().unwrap_or(0.0);
            if !nll.is_finite() {
                return Err(Error::Divergence(format!(
                    "non-finite imitation loss at epoch {epoch}, minibatch {b} ({} samples)",
                    idx.len()
                )));
            }
            let w = -1.0 / idx.len() as f64;
            let grad = scores.weighted_grad(&vec![w; idx.len()]);
            adam.step(policy.values_mut(), &grad);
            policy.project();
            total += nll;
        }
        let mean = total / order.len().div_ceil(cfg.batch_size) as f64;
        debug!("epoch {epoch}: nll {mean:.4}");
        history.push(mean);
    }
    Ok((policy, history))
}

/// Train both levels of the relay policy, each on its own dataset.
///
/// The two objectives are independent, so the levels never share
/// parameters; each gets its own frozen input standardisation.
pub fn train_ril(d_low: &Dataset, d_high: &Dataset, cfg: &ILConfig) -> Result<(PolicyParams, PolicyParams, ILReport)> {
    if d_low.level() != Level::Low || d_high.level() != Level::High {
        return Err(Error::InvalidConfig(
            "train_ril expects a low-level and a high-level dataset".into(),
        ));
    }
    let (low, low_nll) = train_level(d_low, fit_standardizer(d_low)?, cfg, LevelStreams::LOW)?;
    info!(
        "low level trained on {} tuples, final nll {:.4}",
        d_low.len(),
        low_nll.last().unwrap_or(&f64::NAN)
    );
    let (high, high_nll) = train_level(d_high, fit_standardizer(d_high)?, cfg, LevelStreams::HIGH)?;
    info!(
        "high level trained on {} tuples, final nll {:.4}",
        d_high.len(),
        high_nll.last().unwrap_or(&f64::NAN)
    );
    let mut report = ILReport::default();
    for (level, series) in [("low", low_nll), ("high", high_nll)] {
        report
            .epochs
            .extend(series.into_iter().enumerate().map(|(epoch, nll)| EpochRecord {
                epoch,
                level: level.into(),
                nll,
            }));
    }
    Ok((high, low, report))
}

/// Flat goal-conditioned behaviour cloning. Uses the low level's seed
/// streams, so on the same tuples it reproduces `train_ril`'s low level.
pub fn train_flat(ds: &Dataset, cfg: &ILConfig) -> Result<(PolicyParams, ILReport)> {
    if ds.level() != Level::Low {
        return Err(Error::InvalidConfig("train_flat expects a low-level dataset".into()));
    }
    let (policy, nll) = train_level(ds, fit_standardizer(ds)?, cfg, LevelStreams::LOW)?;
    let epochs = nll
        .into_iter()
        .enumerate()
        .map(|(epoch, nll)| EpochRecord {
            epoch,
            level: "flat".into(),
            nll,
        })
        .collect();
    Ok((policy, ILReport { epochs }))
}
