//! Training objectives.
//!
//! The per-step loss is the relative entropy
//! `D(p, q) = p (ln p - ln q) - (p - q)`, a Bregman divergence generated by
//! `x ln x`. The per-timestep KL of the thinning posterior against the model
//! reverse kernel reduces to `lambda (alpha_{t-1} - alpha_t) D(x_0, f)`;
//! dividing that weight out gives the reweighted objective actually trained
//! on, which is zero exactly when the prediction matches the data.

use crate::error::{Error, Result};
use crate::nn::MlpModel;
use crate::process::{CountState, DataBatch};
use crate::rngdist::RngStream;
use crate::schedule::ThinningSchedule;

/// Predictions are floored here before any logarithm; the softplus head can
/// underflow on extreme inputs and the divergence needs q > 0.
pub const PREDICTION_FLOOR: f64 = 1e-8;

/// Relative entropy `p (ln p - ln q) - (p - q)` with the analytic `p = 0`
/// limit `D(0, q) = q`. Requires `q > 0`.
pub fn relative_entropy(p: f64, q: f64) -> Result<f64> {
    if !(q > 0.0) || !q.is_finite() {
        return Err(Error::Domain(format!(
            "relative entropy requires q > 0, got {q}"
        )));
    }
    if !(p >= 0.0) || !p.is_finite() {
        return Err(Error::Domain(format!(
            "relative entropy requires p >= 0, got {p}"
        )));
    }
    Ok(relative_entropy_unchecked(p, q))
}

#[inline]
fn relative_entropy_unchecked(p: f64, q: f64) -> f64 {
    if p == 0.0 {
        q
    } else {
        p * (p.ln() - q.ln()) - (p - q)
    }
}

/// Floored divergence value for hot loops; `q_raw` may be arbitrarily small.
#[inline]
pub(crate) fn re_value(p: f64, q_raw: f64) -> f64 {
    relative_entropy_unchecked(p, q_raw.max(PREDICTION_FLOOR))
}

/// Unscaled divergence gradient in `q`; zero where the floor clamps.
#[inline]
pub(crate) fn re_grad(p: f64, q_raw: f64) -> f64 {
    if q_raw <= PREDICTION_FLOOR {
        0.0
    } else {
        1.0 - p / q_raw
    }
}

/// Analytic per-timestep KL: `lambda_gap * D(x0, f)`. `lambda_gap` is
/// `lambda (alpha_{t-1} - alpha_t)`; the shift of the two shifted-Poisson
/// laws cancels, so only the rates matter.
pub fn kl_shifted_poisson(x0: f64, f: f64, lambda_gap: f64) -> Result<f64> {
    if !(lambda_gap > 0.0) || !lambda_gap.is_finite() {
        return Err(Error::Domain(format!(
            "lambda_gap must be positive, got {lambda_gap}"
        )));
    }
    Ok(lambda_gap * relative_entropy(x0, f)?)
}

/// Loss values for one mini-batch.
#[derive(Clone, Debug)]
pub struct LossBreakdown {
    /// Mean over data dimensions of the divergence, one entry per example.
    pub per_example: Vec<f64>,
    /// The timestep drawn for each example.
    pub per_timestep_tag: Vec<u32>,
    /// Arithmetic mean of `per_example`.
    pub mean: f64,
}

impl LossBreakdown {
    fn from_parts(per_example: Vec<f64>, per_timestep_tag: Vec<u32>) -> Self {
        let mean = per_example.iter().sum::<f64>() / per_example.len().max(1) as f64;
        Self {
            per_example,
            per_timestep_tag,
            mean,
        }
    }
}

fn check_loss_shapes(x0: &DataBatch, ts: &[u32], x0_hat: &[f64]) -> Result<()> {
    let n = x0.rows() * x0.cols();
    if x0_hat.len() != n || ts.len() != x0.rows() {
        return Err(Error::Shape(format!(
            "loss shapes disagree: data {}x{}, {} predictions, {} timesteps",
            x0.rows(),
            x0.cols(),
            x0_hat.len(),
            ts.len()
        )));
    }
    Ok(())
}

/// Reweighted objective of the Poisson variant: per example, the mean over
/// data dimensions of `D(x0, max(x0_hat, floor))`.
///
/// `z_t` is carried for interface symmetry with the binomial variant, which
/// does consume the counts; here only shapes are checked against it.
pub fn jump_loss(
    x0: &DataBatch,
    z_t: &CountState,
    ts: &[u32],
    x0_hat: &[f64],
) -> Result<LossBreakdown> {
    check_loss_shapes(x0, ts, x0_hat)?;
    if z_t.rows() != x0.rows() || z_t.cols() != x0.cols() {
        return Err(Error::Shape("count state shape mismatch".into()));
    }
    let cols = x0.cols();
    let mut dense_row = vec![0.0; cols];
    let mut per_example = Vec::with_capacity(x0.rows());
    for r in 0..x0.rows() {
        x0.row_dense_into(r, &mut dense_row);
        let preds = &x0_hat[r * cols..(r + 1) * cols];
        let mut acc = 0.0;
        for (&p, &q) in dense_row.iter().zip(preds) {
            acc += relative_entropy_unchecked(p, q.max(PREDICTION_FLOOR));
        }
        per_example.push(acc / cols as f64);
    }
    Ok(LossBreakdown::from_parts(per_example, ts.to_vec()))
}

/// Gradient of the mean [`jump_loss`] with respect to each prediction:
/// `(1 - x0 / q) / (B * D)` where `q` is the floored prediction, and zero
/// where the floor is active (the clamp has zero slope there).
pub fn jump_loss_grad(x0: &DataBatch, x0_hat: &[f64], grad_out: &mut [f64]) -> Result<()> {
    let n = x0.rows() * x0.cols();
    if x0_hat.len() != n || grad_out.len() != n {
        return Err(Error::Shape("gradient buffer shape mismatch".into()));
    }
    let cols = x0.cols();
    let scale = 1.0 / (x0.rows() * cols) as f64;
    let mut dense_row = vec![0.0; cols];
    for r in 0..x0.rows() {
        x0.row_dense_into(r, &mut dense_row);
        for c in 0..cols {
            let q_raw = x0_hat[r * cols + c];
            let g = if q_raw <= PREDICTION_FLOOR {
                0.0
            } else {
                (1.0 - dense_row[c] / q_raw) * scale
            };
            grad_out[r * cols + c] = g;
        }
    }
    Ok(())
}

/// Reweighted objective of the binomial variant: per coordinate,
/// `p_t * D(x0 - z_t, max(x0_hat - z_t, 0))` with the prediction residual
/// floored, and exactly zero where `x0 = z_t` and the prediction does not
/// exceed the running count.
pub fn binjump_loss(
    x0: &DataBatch,
    z_t: &CountState,
    ts: &[u32],
    x0_hat: &[f64],
    schedule: &ThinningSchedule,
) -> Result<LossBreakdown> {
    check_loss_shapes(x0, ts, x0_hat)?;
    if z_t.rows() != x0.rows() || z_t.cols() != x0.cols() {
        return Err(Error::Shape("count state shape mismatch".into()));
    }
    let cols = x0.cols();
    let counts = z_t.counts();
    let mut dense_row = vec![0.0; cols];
    let mut per_example = Vec::with_capacity(x0.rows());
    for r in 0..x0.rows() {
        x0.row_dense_into(r, &mut dense_row);
        let p_t = crate::process::binjump_p(schedule, ts[r]);
        let mut acc = 0.0;
        for c in 0..cols {
            let i = r * cols + c;
            let z = counts[i] as f64;
            let target = dense_row[c] - z;
            if target < 0.0 {
                return Err(Error::Domain(format!(
                    "binomial-variant loss needs z_t <= x0, violated at flat index {i}"
                )));
            }
            let resid = (x0_hat[i] - z).max(0.0);
            if target == 0.0 && resid == 0.0 {
                continue;
            }
            acc += p_t * relative_entropy_unchecked(target, resid.max(PREDICTION_FLOOR));
        }
        per_example.push(acc / cols as f64);
    }
    Ok(LossBreakdown::from_parts(per_example, ts.to_vec()))
}

/// Gradient of the mean [`binjump_loss`] with respect to each prediction.
/// Zero wherever the residual clamp or the floor is active.
pub fn binjump_loss_grad(
    x0: &DataBatch,
    z_t: &CountState,
    ts: &[u32],
    x0_hat: &[f64],
    schedule: &ThinningSchedule,
    grad_out: &mut [f64],
) -> Result<()> {
    let n = x0.rows() * x0.cols();
    if x0_hat.len() != n || grad_out.len() != n {
        return Err(Error::Shape("gradient buffer shape mismatch".into()));
    }
    let cols = x0.cols();
    let counts = z_t.counts();
    let scale = 1.0 / (x0.rows() * cols) as f64;
    let mut dense_row = vec![0.0; cols];
    for r in 0..x0.rows() {
        x0.row_dense_into(r, &mut dense_row);
        let p_t = crate::process::binjump_p(schedule, ts[r]);
        for c in 0..cols {
            let i = r * cols + c;
            let z = counts[i] as f64;
            let resid = x0_hat[i] - z;
            grad_out[i] = if resid <= PREDICTION_FLOOR {
                0.0
            } else {
                let target = dense_row[c] - z;
                if target == 0.0 && resid <= 0.0 {
                    0.0
                } else {
                    p_t * (1.0 - target / resid) * scale
                }
            };
        }
    }
    Ok(())
}

/// Diagnostic decomposition of the bound the reweighted objective descends
/// from.
#[derive(Clone, Debug)]
pub struct ElboTerms {
    /// Monte Carlo estimate of the sum over timesteps of the weighted KL
    /// terms, i.e. with the `lambda (alpha_{t-1} - alpha_t)` factors kept.
    pub sum_kl_terms: f64,
    /// Mean of `Pr(z_T > 0) = 1 - exp(-lambda alpha_T x0)` over the batch;
    /// the terminal term is this residual mass and is dropped from training.
    pub terminal_mass: f64,
    /// Monte Carlo mean of the unweighted divergence, the quantity the
    /// training loss actually averages.
    pub reweighted_mean: f64,
    /// Number of Monte Carlo draws behind the estimates.
    pub n_mc: usize,
    /// The reconstruction term is not modeled; decoding is the deterministic
    /// constraint map, so only a marker is reported.
    pub reconstruction_modeled: bool,
}

/// Monte Carlo estimate of the bound decomposition under a model.
///
/// Each draw picks a uniform timestep and a marginal count sample, evaluates
/// the divergence against the model prediction, and scales by `T` times the
/// step weight to estimate the sum over timesteps.
pub fn elbo_report(
    x0: &DataBatch,
    model: &MlpModel,
    schedule: &ThinningSchedule,
    rng: &mut RngStream,
    n_mc: usize,
) -> Result<ElboTerms> {
    if n_mc == 0 {
        return Err(Error::InvalidParameter("n_mc must be >= 1".into()));
    }
    let t_steps = schedule.t_steps();
    let cols = x0.cols();
    let mut dense_row = vec![0.0; cols];
    let mut weighted_acc = 0.0;
    let mut plain_acc = 0.0;
    let mut terminal_acc = 0.0;
    let lambda_alpha_t = schedule.lambda() * schedule.alpha(t_steps);
    for r in 0..x0.rows() {
        x0.row_dense_into(r, &mut dense_row);
        terminal_acc += dense_row
            .iter()
            .map(|&x| 1.0 - (-lambda_alpha_t * x).exp())
            .sum::<f64>()
            / cols as f64;
        for _ in 0..n_mc {
            let t = rng.next_index(t_steps as u64) as u32 + 1;
            let rate_scale = schedule.lambda() * schedule.alpha(t);
            let mut z = vec![0u64; cols];
            for (zi, &x) in z.iter_mut().zip(&dense_row) {
                *zi = crate::rngdist::sample_poisson(rate_scale * x, rng)?;
            }
            let (pred, _) = model.forward_counts(&z, &[t], 1, schedule)?;
            let mut div = 0.0;
            for (&x, &q) in dense_row.iter().zip(&pred) {
                div += relative_entropy_unchecked(x, q.max(PREDICTION_FLOOR));
            }
            div /= cols as f64;
            plain_acc += div;
            weighted_acc += t_steps as f64 * schedule.lambda() * schedule.gap(t) * div;
        }
    }
    let denom = (x0.rows() * n_mc) as f64;
    Ok(ElboTerms {
        sum_kl_terms: weighted_acc / denom,
        terminal_mass: terminal_acc / x0.rows() as f64,
        reweighted_mean: plain_acc / denom,
        n_mc,
        reconstruction_modeled: false,
    })
}
