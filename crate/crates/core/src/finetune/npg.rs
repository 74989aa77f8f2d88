//! Natural policy gradient with a KL trust region.

use log::warn;
use ndarray::{ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{PolicyParams, ScoreBatch};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NpgConfig {
    /// Target KL divergence per update.
    pub kl_delta: f64,
    pub cg_iters: usize,
    pub cg_damping: f64,
    /// CG stops early once the residual norm falls below this.
    pub cg_residual_tol: f64,
    /// Step halvings tried before an update is rejected.
    pub max_halvings: usize,
    /// Fraction of the rollout batch, evenly spaced, used for Fisher-vector
    /// products. The gradient always uses the whole batch.
    pub fisher_sample_fraction: f64,
}

impl Default for NpgConfig {
    fn default() -> Self {
        Self {
            kl_delta: 0.01,
            cg_iters: 10,
            cg_damping: 1e-4,
            cg_residual_tol: 1e-10,
            max_halvings: 10,
            fisher_sample_fraction: 1.0,
        }
    }
}

impl NpgConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.kl_delta > 0.0) {
            return Err(Error::InvalidConfig("finetune.kl_delta must be positive".into()));
        }
        if self.cg_iters == 0 {
            return Err(Error::InvalidConfig("finetune.cg_iters must be at least 1".into()));
        }
        if !(self.cg_damping >= 0.0) {
            return Err(Error::InvalidConfig("finetune.cg_damping must be non-negative".into()));
        }
        if !(self.fisher_sample_fraction > 0.0 && self.fisher_sample_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "finetune.fisher_sample_fraction must lie in (0, 1], got {}",
                self.fisher_sample_fraction
            )));
        }
        Ok(())
    }
}

/// On-policy samples with their advantages.
#[derive(Clone, Copy, Debug)]
pub struct RolloutBatch<'a> {
    pub inputs: ArrayView2<'a, f64>,
    pub actions: ArrayView2<'a, f64>,
    pub advantages: &'a [f64],
}

/// Demonstration tuples whose mean log-likelihood gradient is added with
/// weight `weight`.
#[derive(Clone, Copy, Debug)]
pub struct DemoTerm<'a> {
    pub inputs: ArrayView2<'a, f64>,
    pub actions: ArrayView2<'a, f64>,
    pub weight: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    /// Empirical `KL(old || new)` of the applied update; 0 when rejected.
    pub kl: f64,
    pub grad_norm: f64,
    /// `g^T x` where `x` solves the damped Fisher system.
    pub natural_sq: f64,
    /// Multiplier applied to `x` in the accepted update.
    pub step_scale: f64,
    pub halvings: usize,
    pub accepted: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solve `A x = b` for symmetric positive definite `A` given as a product.
pub fn conjugate_gradient(apply: impl Fn(&[f64]) -> Vec<f64>, b: &[f64], iters: usize, residual_tol: f64) -> Vec<f64> {
    let mut x = vec![0.0; b.len()];
    let mut r = b.to_vec();
    let mut p = b.to_vec();
    let mut rr = dot(&r, &r);
    for _ in 0..iters {
        if rr.sqrt() <= residual_tol {
            break;
        }
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            break;
        }
        let alpha = rr / pap;
        for i in 0..x.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for i in 0..p.len() {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    x
}

/// Vanilla gradient `(1/N) sum_i A_i grad log pi_i + lambda (1/M) sum_j
/// grad log pi(demo_j)`, with the rollout score batch for Fisher products.
pub fn surrogate_gradient(
    params: &PolicyParams,
    batch: &RolloutBatch<'_>,
    demo: Option<&DemoTerm<'_>>,
) -> Result<(ScoreBatch, Vec<f64>)> {
    let n = batch.inputs.nrows();
    if n == 0 {
        return Err(Error::Empty("rollout batch"));
    }
    if batch.advantages.len() != n {
        return Err(Error::DimensionMismatch {
            context: "advantages",
            expected: n,
            got: batch.advantages.len(),
        });
    }
    let scores = params.score_batch(batch.inputs, batch.actions)?;
    let w: Vec<f64> = batch.advantages.iter().map(|a| a / n as f64).collect();
    let mut g = scores.weighted_grad(&w);
    if let Some(d) = demo.filter(|d| d.weight != 0.0 && d.inputs.nrows() > 0) {
        let m = d.inputs.nrows();
        let demo_scores = params.score_batch(d.inputs, d.actions)?;
        let dg = demo_scores.weighted_grad(&vec![d.weight / m as f64; m]);
        for (a, b) in g.iter_mut().zip(dg) {
            *a += b;
        }
    }
    Ok((scores, g))
}

/// Solve `(F + damping I) x = g` by conjugate gradient, where `F` is the
/// empirical Fisher matrix of `scores`.
pub fn natural_direction(scores: &ScoreBatch, g: &[f64], cfg: &NpgConfig) -> Vec<f64> {
    let fvp = |v: &[f64]| {
        let mut out = scores.fisher_vector_product(v);
        for (o, vi) in out.iter_mut().zip(v) {
            *o += cfg.cg_damping * vi;
        }
        out
    };
    conjugate_gradient(fvp, g, cfg.cg_iters, cfg.cg_residual_tol)
}

/// Evenly spaced row subset for Fisher products, or `None` for all rows.
fn fisher_rows(n: usize, fraction: f64) -> Option<Vec<usize>> {
    let m = ((n as f64 * fraction).ceil() as usize).clamp(1, n);
    (m < n).then(|| (0..m).map(|k| k * n / m).collect())
}

/// One natural gradient ascent step with step size `sqrt(2 delta / g^T x)`,
/// halved until the batch KL is within `2 delta`.
pub fn npg_step(
    params: &PolicyParams,
    batch: &RolloutBatch<'_>,
    demo: Option<&DemoTerm<'_>>,
    cfg: &NpgConfig,
) -> Result<(PolicyParams, StepStats)> {
    cfg.validate()?;
    let (scores, g) = surrogate_gradient(params, batch, demo)?;
    let x = match fisher_rows(batch.inputs.nrows(), cfg.fisher_sample_fraction) {
        None => natural_direction(&scores, &g, cfg),
        Some(rows) => {
            let sub = params.score_batch(
                batch.inputs.select(Axis(0), &rows).view(),
                batch.actions.select(Axis(0), &rows).view(),
            )?;
            natural_direction(&sub, &g, cfg)
        }
    };
    let gx = dot(&g, &x);
    let mut stats = StepStats {
        grad_norm: dot(&g, &g).sqrt(),
        natural_sq: gx,
        ..Default::default()
    };
    if !(gx > 0.0) || !gx.is_finite() {
        warn!("skipping update: g^T F^-1 g = {gx}");
        return Ok((params.clone(), stats));
    }
    let mut scale = (2.0 * cfg.kl_delta / gx).sqrt();
    for halvings in 0..=cfg.max_halvings {
        let candidate = params.stepped(&x, scale)?;
        let kl = params.mean_kl(&candidate, batch.inputs)?;
        if kl.is_finite() && kl <= 2.0 * cfg.kl_delta {
            stats.kl = kl.max(0.0);
            stats.step_scale = scale;
            stats.halvings = halvings;
            stats.accepted = true;
            return Ok((candidate, stats));
        }
        scale *= 0.5;
    }
    warn!(
        "rejecting update: KL above {} after {} halvings",
        2.0 * cfg.kl_delta,
        cfg.max_halvings
    );
    stats.halvings = cfg.max_halvings;
    Ok((params.clone(), stats))
}
