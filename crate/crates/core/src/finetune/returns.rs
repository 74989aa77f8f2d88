//! Discounted returns and the linear value baseline.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Reward-to-go `R_t = sum_{k >= t} gamma^(k - t) r_k`.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for t in (0..rewards.len()).rev() {
        acc = rewards[t] + gamma * acc;
        out[t] = acc;
    }
    out
}

/// Baseline features: state, goal, powers of episode progress, and squared
/// norms.
pub fn baseline_features(state: &[f64], goal: &[f64], progress: f64) -> Vec<f64> {
    let mut f = Vec::with_capacity(state.len() + goal.len() + 7);
    f.extend_from_slice(state);
    f.extend_from_slice(goal);
    f.extend([progress, progress * progress, progress.powi(3)]);
    f.push(state.iter().map(|x| x * x).sum());
    f.push(goal.iter().map(|x| x * x).sum());
    f.push(state.iter().zip(goal).map(|(a, b)| (a - b).powi(2)).sum());
    f.push(1.0);
    f
}

/// Least-squares linear value estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearBaseline {
    coef: Vec<f64>,
}

impl LinearBaseline {
    /// Ridge regression of `targets` on `features`; the ridge grows tenfold
    /// until the normal equations factorise.
    pub fn fit(features: &[Vec<f64>], targets: &[f64]) -> Result<Self> {
        if features.is_empty() || features.len() != targets.len() {
            return Err(Error::Empty("baseline regression"));
        }
        let p = features[0].len();
        let x = DMatrix::from_fn(features.len(), p, |i, j| features[i][j]);
        let y = DVector::from_column_slice(targets);
        let xtx = x.tr_mul(&x);
        let xty = x.tr_mul(&y);
        let mut ridge = 1e-5;
        for _ in 0..10 {
            let reg = &xtx + DMatrix::identity(p, p) * ridge;
            if let Some(chol) = reg.cholesky() {
                let coef = chol.solve(&xty);
                if coef.iter().all(|c| c.is_finite()) {
                    return Ok(Self {
                        coef: coef.iter().copied().collect(),
                    });
                }
            }
            ridge *= 10.0;
        }
        Err(Error::Divergence("baseline regression did not factorise".into()))
    }

    pub fn zero(p: usize) -> Self {
        Self { coef: vec![0.0; p] }
    }

    pub fn predict(&self, features: &[f64]) -> f64 {
        self.coef.iter().zip(features).map(|(c, f)| c * f).sum()
    }
}

/// `returns - baseline`, optionally shifted and scaled to zero mean and
/// unit variance.
pub fn advantages(returns: &[f64], predicted: &[f64], normalize: bool) -> Vec<f64> {
    let mut adv: Vec<f64> = returns.iter().zip(predicted).map(|(r, b)| r - b).collect();
    if normalize && !adv.is_empty() {
        let n = adv.len() as f64;
        let mean = adv.iter().sum::<f64>() / n;
        let std = (adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
        for a in &mut adv {
            *a = (*a - mean) / (std + 1e-8);
        }
    }
    adv
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_reward_matches_geometric_sum() {
        let (r, gamma, t) = (0.7, 0.995, 280);
        let ret = discounted_returns(&vec![r; t], gamma);
        let expected = r * (1.0 - gamma.powi(t as i32)) / (1.0 - gamma);
        assert!((ret[0] - expected).abs() < 1e-10);
        assert_eq!(ret[t - 1], r);
    }

    #[test]
    fn baseline_recovers_a_linear_target() {
        let feats: Vec<Vec<f64>> = (0..50)
            .map(|i| {
                let x = i as f64 / 50.0;
                vec![x, (3.0 * x).sin(), 1.0]
            })
            .collect();
        let y: Vec<f64> = feats.iter().map(|f| 2.0 * f[0] - f[1] + 0.5).collect();
        let b = LinearBaseline::fit(&feats, &y).unwrap();
        for (f, t) in feats.iter().zip(&y) {
            assert!((b.predict(f) - t).abs() < 1e-4);
        }
    }

    #[test]
    fn normalised_advantages_are_standardised() {
        let adv = advantages(&[1.0, 2.0, 3.0, 6.0], &[0.0; 4], true);
        let mean: f64 = adv.iter().sum::<f64>() / 4.0;
        let var: f64 = adv.iter().map(|a| a * a).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-6);
    }
}
