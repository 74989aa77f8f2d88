use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::Rng;
use rand_distr::StandardNormal;

use super::PolicyParams;
use crate::error::{Error, Result};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Activations of one batched forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// Input to each dense layer; `acts[0]` is the standardised input.
    pub acts: Vec<Array2<f64>>,
    /// Gaussian means, one row per sample.
    pub mean: Array2<f64>,
}

/// Per-sample score information for a batch of `(input, action)` pairs.
///
/// The gradient of `log pi(a_i | x_i)` with respect to layer `l`'s weights
/// is the outer product `deltas[l][i] x acts[l][i]`, its bias gradient is
/// `deltas[l][i]`, and its log-std gradient is `log_std_scores[i]`.
#[derive(Clone, Debug)]
pub struct ScoreBatch {
    acts: Vec<Array2<f64>>,
    deltas: Vec<Array2<f64>>,
    log_std_scores: Array2<f64>,
    log_probs: Array1<f64>,
    offsets: Vec<(usize, usize)>,
    log_std_offset: usize,
    num_params: usize,
}

impl PolicyParams {
    pub(crate) fn weight(&self, layer: usize) -> ArrayView2<'_, f64> {
        let (fan_in, fan_out) = self.shape().layers()[layer];
        let (w, _) = self.shape().layer_offsets()[layer];
        ArrayView2::from_shape((fan_out, fan_in), &self.values()[w..w + fan_in * fan_out])
            .expect("layout matches shape")
    }

    pub(crate) fn bias(&self, layer: usize) -> ArrayView1<'_, f64> {
        let (_, fan_out) = self.shape().layers()[layer];
        let (_, b) = self.shape().layer_offsets()[layer];
        ArrayView1::from(&self.values()[b..b + fan_out])
    }

    fn check_inputs(&self, raw: &ArrayView2<f64>) -> Result<()> {
        if raw.ncols() != self.shape().input_dim {
            return Err(Error::DimensionMismatch {
                context: "policy input",
                expected: self.shape().input_dim,
                got: raw.ncols(),
            });
        }
        Ok(())
    }

    /// Stack `[state, goal]` rows into a raw input matrix.
    pub fn input_matrix<'a>(&self, rows: impl ExactSizeIterator<Item = (&'a [f64], &'a [f64])>) -> Result<Array2<f64>> {
        let half = self.state_dim();
        let n = rows.len();
        let mut x = Array2::zeros((n, 2 * half));
        for (i, (s, g)) in rows.enumerate() {
            if s.len() != half || g.len() != half {
                return Err(Error::DimensionMismatch {
                    context: "state/goal",
                    expected: half,
                    got: if s.len() != half { s.len() } else { g.len() },
                });
            }
            let mut row = x.row_mut(i);
            row.as_slice_mut().unwrap()[..half].copy_from_slice(s);
            row.as_slice_mut().unwrap()[half..].copy_from_slice(g);
        }
        Ok(x)
    }

    /// Batched forward pass over raw (unstandardised) inputs.
    pub fn forward_batch(&self, raw: ArrayView2<f64>) -> Result<ForwardCache> {
        self.check_inputs(&raw)?;
        let std = self.standardizer();
        let mut x = raw.to_owned();
        for mut row in x.rows_mut() {
            for (k, v) in row.iter_mut().enumerate() {
                *v = (*v - std.mean[k]) / std.scale[k];
            }
        }
        let n_layers = self.shape().layers().len();
        let mut acts = Vec::with_capacity(n_layers);
        let mut cur = x;
        for l in 0..n_layers {
            let mut z = cur.dot(&self.weight(l).t());
            z += &self.bias(l);
            acts.push(cur);
            if l + 1 < n_layers {
                z.mapv_inplace(|v| v.max(0.0));
            }
            cur = z;
        }
        Ok(ForwardCache { acts, mean: cur })
    }

    /// Mean and log-std of the action distribution for one input.
    pub fn forward(&self, state: &[f64], goal: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let x = self.input_matrix(std::iter::once((state, goal)))?;
        let cache = self.forward_batch(x.view())?;
        Ok((cache.mean.row(0).to_vec(), self.log_std().to_vec()))
    }

    /// Diagonal-Gaussian log density of `action`.
    pub fn log_prob(&self, state: &[f64], goal: &[f64], action: &[f64]) -> Result<f64> {
        let (mean, log_std) = self.forward(state, goal)?;
        if action.len() != mean.len() {
            return Err(Error::DimensionMismatch {
                context: "action",
                expected: mean.len(),
                got: action.len(),
            });
        }
        Ok(mean
            .iter()
            .zip(&log_std)
            .zip(action)
            .map(|((m, ls), a)| {
                let z = (a - m) / ls.exp();
                -0.5 * z * z - ls - HALF_LN_2PI
            })
            .sum())
    }

    /// Exact gradient of [`log_prob`](Self::log_prob) with respect to the
    /// flat parameter vector.
    pub fn grad_log_prob(&self, state: &[f64], goal: &[f64], action: &[f64]) -> Result<Vec<f64>> {
        let x = self.input_matrix(std::iter::once((state, goal)))?;
        let a = Array2::from_shape_vec((1, action.len()), action.to_vec()).unwrap();
        Ok(self.score_batch(x.view(), a.view())?.weighted_grad(&[1.0]))
    }

    /// Draw `mean + sigma * eps` for every row of `mean`.
    pub fn sample_rows<R: Rng>(&self, mean: &ArrayView2<f64>, rngs: &mut [R]) -> Array2<f64> {
        let sigma: Vec<f64> = self.log_std().iter().map(|v| v.exp()).collect();
        let mut out = mean.to_owned();
        for (mut row, rng) in out.rows_mut().into_iter().zip(rngs.iter_mut()) {
            for (v, s) in row.iter_mut().zip(&sigma) {
                let eps: f64 = rng.sample(StandardNormal);
                *v += s * eps;
            }
        }
        out
    }

    /// Forward and backward passes producing per-sample scores.
    pub fn score_batch(&self, raw: ArrayView2<f64>, actions: ArrayView2<f64>) -> Result<ScoreBatch> {
        let cache = self.forward_batch(raw)?;
        let out_dim = self.output_dim();
        if actions.ncols() != out_dim || actions.nrows() != raw.nrows() {
            return Err(Error::DimensionMismatch {
                context: "action batch",
                expected: out_dim,
                got: actions.ncols(),
            });
        }
        let log_std = self.log_std();
        let inv_var: Vec<f64> = log_std.iter().map(|v| (-2.0 * v).exp()).collect();
        let ls_sum: f64 = log_std.iter().sum();
        let n = raw.nrows();
        let mut d_mean = Array2::zeros((n, out_dim));
        let mut ls_scores = Array2::zeros((n, out_dim));
        let mut log_probs = Array1::zeros(n);
        for i in 0..n {
            let mut sq = 0.0;
            for k in 0..out_dim {
                let diff = actions[[i, k]] - cache.mean[[i, k]];
                let z2 = diff * diff * inv_var[k];
                sq += z2;
                d_mean[[i, k]] = diff * inv_var[k];
                ls_scores[[i, k]] = z2 - 1.0;
            }
            log_probs[i] = -0.5 * sq - ls_sum - out_dim as f64 * HALF_LN_2PI;
        }
        let n_layers = cache.acts.len();
        let mut deltas = vec![Array2::zeros((0, 0)); n_layers];
        let mut cur = d_mean;
        for l in (0..n_layers).rev() {
            if l > 0 {
                let mut back = cur.dot(&self.weight(l));
                Zip::from(&mut back).and(&cache.acts[l]).for_each(|d, &a| {
                    if a <= 0.0 {
                        *d = 0.0
                    }
                });
                deltas[l] = std::mem::replace(&mut cur, back);
            } else {
                deltas[0] = std::mem::take(&mut cur);
            }
        }
        Ok(ScoreBatch {
            acts: cache.acts,
            deltas,
            log_std_scores: ls_scores,
            log_probs,
            offsets: self.shape().layer_offsets(),
            log_std_offset: self.shape().log_std_offset(),
            num_params: self.num_params(),
        })
    }
}

impl ScoreBatch {
    pub fn len(&self) -> usize {
        self.log_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_probs.is_empty()
    }

    pub fn log_probs(&self) -> &Array1<f64> {
        &self.log_probs
    }

    /// `sum_i w_i * grad log pi(a_i | x_i)`.
    pub fn weighted_grad(&self, weights: &[f64]) -> Vec<f64> {
        assert_eq!(weights.len(), self.len(), "one weight per sample");
        let w = ArrayView1::from(weights);
        let w_col = w.view().insert_axis(Axis(1));
        let mut grad = vec![0.0; self.num_params];
        for (l, &(wo, bo)) in self.offsets.iter().enumerate() {
            let dw = &self.deltas[l] * &w_col;
            let g = dw.t().dot(&self.acts[l]);
            let len = g.len();
            grad[wo..wo + len].copy_from_slice(g.as_standard_layout().as_slice().unwrap());
            let gb = dw.sum_axis(Axis(0));
            grad[bo..bo + gb.len()].copy_from_slice(gb.as_slice().unwrap());
        }
        let gs = (&self.log_std_scores * &w_col).sum_axis(Axis(0));
        grad[self.log_std_offset..].copy_from_slice(gs.as_slice().unwrap());
        grad
    }

    /// `c_i = grad log pi(a_i | x_i) . v` for every sample.
    pub fn sample_dots(&self, v: &[f64]) -> Array1<f64> {
        assert_eq!(v.len(), self.num_params);
        let mut c = Array1::zeros(self.len());
        for (l, &(wo, bo)) in self.offsets.iter().enumerate() {
            let (n_out, n_in) = (self.deltas[l].ncols(), self.acts[l].ncols());
            let vw = ArrayView2::from_shape((n_out, n_in), &v[wo..wo + n_out * n_in]).unwrap();
            let vb = ArrayView1::from(&v[bo..bo + n_out]);
            let mut proj = self.acts[l].dot(&vw.t());
            proj += &vb;
            proj *= &self.deltas[l];
            c += &proj.sum_axis(Axis(1));
        }
        let vs = ArrayView1::from(&v[self.log_std_offset..]);
        c += &self.log_std_scores.dot(&vs);
        c
    }

    /// Empirical Fisher-vector product `(1/N) sum_i g_i (g_i . v)`.
    pub fn fisher_vector_product(&self, v: &[f64]) -> Vec<f64> {
        let n = self.len() as f64;
        let c = self.sample_dots(v).mapv(|x| x / n);
        self.weighted_grad(c.as_slice().unwrap())
    }
}

/// `KL(old || new)` between two diagonal Gaussians.
pub fn gaussian_kl(mean_old: &[f64], ls_old: &[f64], mean_new: &[f64], ls_new: &[f64]) -> f64 {
    mean_old
        .iter()
        .zip(ls_old)
        .zip(mean_new.iter().zip(ls_new))
        .map(|((mo, lo), (mn, ln))| {
            let var_old = (2.0 * lo).exp();
            let var_new = (2.0 * ln).exp();
            ln - lo + (var_old + (mo - mn).powi(2)) / (2.0 * var_new) - 0.5
        })
        .sum()
}

impl PolicyParams {
    /// Mean `KL(self || other)` over a batch of raw inputs.
    pub fn mean_kl(&self, other: &PolicyParams, raw: ArrayView2<f64>) -> Result<f64> {
        let a = self.forward_batch(raw)?.mean;
        let b = other.forward_batch(raw)?.mean;
        let (la, lb) = (self.log_std(), other.log_std());
        let total: f64 = a
            .rows()
            .into_iter()
            .zip(b.rows())
            .map(|(ra, rb)| gaussian_kl(ra.as_slice().unwrap(), la, rb.as_slice().unwrap(), lb))
            .sum();
        Ok(total / raw.nrows().max(1) as f64)
    }
}
