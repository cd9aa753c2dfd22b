//! Minimal Gaussian denoising-diffusion baseline.
//!
//! Epsilon-prediction with a beta-linear schedule and ancestral sampling,
//! sharing the MLP, the optimizer and the evaluation pathways with the count
//! models so comparisons isolate the process, not the plumbing. Non-negative
//! data are affinely mapped to `[-1, 1]` for training and mapped back (with a
//! clamp at zero) before evaluation.

use crate::error::{Error, Result};
use crate::process::DataBatch;
use crate::rngdist::{sample_std_normal, RngStream};

pub const DEFAULT_DDPM_BETA1: f64 = 1e-4;
pub const DEFAULT_DDPM_BETA_END: f64 = 0.02;

/// Variance schedule with cached cumulative products.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianSchedule {
    betas: Vec<f64>,
    /// `alpha_bar_0 ..= alpha_bar_T` with `alpha_bar_0 = 1`.
    alpha_bars: Vec<f64>,
}

impl GaussianSchedule {
    pub fn beta_linear(t_steps: u32, beta1: f64, beta_end: f64) -> Result<Self> {
        if t_steps == 0 {
            return Err(Error::InvalidParameter("schedule needs T >= 1".into()));
        }
        if !(beta1 > 0.0 && beta1 <= beta_end && beta_end < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < beta1 <= beta_end < 1, got {beta1}, {beta_end}"
            )));
        }
        let betas: Vec<f64> = if t_steps == 1 {
            vec![beta_end]
        } else {
            (0..t_steps)
                .map(|i| beta1 + (beta_end - beta1) * i as f64 / (t_steps - 1) as f64)
                .collect()
        };
        Self::from_betas(betas)
    }

    pub fn from_betas(betas: Vec<f64>) -> Result<Self> {
        let mut alpha_bars = Vec::with_capacity(betas.len() + 1);
        alpha_bars.push(1.0);
        for (i, &b) in betas.iter().enumerate() {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "beta_{} = {b} outside (0, 1)",
                    i + 1
                )));
            }
            alpha_bars.push(alpha_bars[i] * (1.0 - b));
        }
        Ok(Self { betas, alpha_bars })
    }

    pub fn t_steps(&self) -> u32 {
        self.betas.len() as u32
    }

    pub fn beta(&self, t: u32) -> f64 {
        self.betas[t as usize - 1]
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alpha_bar(&self, t: u32) -> f64 {
        self.alpha_bars[t as usize]
    }

    /// Posterior variance of the reverse kernel at step `t`.
    pub fn posterior_variance(&self, t: u32) -> f64 {
        let beta = self.beta(t);
        if t == 1 {
            // The step into t = 0 is deterministic in ancestral sampling.
            0.0
        } else {
            (1.0 - self.alpha_bar(t - 1)) / (1.0 - self.alpha_bar(t)) * beta
        }
    }
}

/// Affine map of the observed data range onto `[-1, 1]`.
///
/// Heavy-tailed data would stretch the range until the bulk collapses around
/// -1, so when the maximum is far beyond the 0.999 quantile the upper anchor
/// is that quantile instead. Inversion clamps at zero; values above the
/// anchor extrapolate linearly.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Rescaler {
    pub lo: f64,
    pub hi: f64,
}

const HEAVY_TAIL_FACTOR: f64 = 2.0;

impl Rescaler {
    pub fn fit(data: &DataBatch) -> Result<Self> {
        let mut values = data.to_dense_vec();
        if values.is_empty() {
            return Err(Error::Shape("cannot fit a rescaler to empty data".into()));
        }
        values.sort_by(|a, b| a.partial_cmp(b).expect("finite data"));
        let lo = values[0];
        let max = *values.last().unwrap();
        let q999 = values[((values.len() - 1) as f64 * 0.999).floor() as usize];
        let hi = if max > HEAVY_TAIL_FACTOR * q999 && q999 > lo { q999 } else { max };
        if hi <= lo {
            // Degenerate (constant) data still needs a non-empty interval.
            return Ok(Self { lo, hi: lo + 1.0 });
        }
        Ok(Self { lo, hi })
    }

    #[inline]
    pub fn apply(&self, v: f64) -> f64 {
        2.0 * (v - self.lo) / (self.hi - self.lo) - 1.0
    }

    #[inline]
    pub fn invert(&self, v: f64) -> f64 {
        (self.lo + (v + 1.0) * 0.5 * (self.hi - self.lo)).max(0.0)
    }
}

/// Forward corruption: `x_t = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps`.
pub fn ddpm_forward(x0_scaled: &[f64], t: u32, noise: &[f64], schedule: &GaussianSchedule) -> Result<Vec<f64>> {
    if t > schedule.t_steps() {
        return Err(Error::Timestep(format!(
            "t = {t} exceeds schedule length {}",
            schedule.t_steps()
        )));
    }
    if noise.len() != x0_scaled.len() {
        return Err(Error::Shape("noise and data lengths differ".into()));
    }
    let ab = schedule.alpha_bar(t);
    let (sa, sn) = (ab.sqrt(), (1.0 - ab).sqrt());
    Ok(x0_scaled
        .iter()
        .zip(noise)
        .map(|(x, e)| sa * x + sn * e)
        .collect())
}

/// Mean squared error between predicted and actual noise.
pub fn ddpm_loss(eps_hat: &[f64], eps: &[f64]) -> Result<f64> {
    if eps_hat.len() != eps.len() {
        return Err(Error::Shape("loss shapes disagree".into()));
    }
    let n = eps.len() as f64;
    Ok(eps_hat
        .iter()
        .zip(eps)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n)
}

/// Gradient of [`ddpm_loss`] with respect to the prediction.
pub fn ddpm_loss_grad(eps_hat: &[f64], eps: &[f64], grad_out: &mut [f64]) {
    let n = eps.len() as f64;
    for ((g, &a), &b) in grad_out.iter_mut().zip(eps_hat).zip(eps) {
        *g = 2.0 * (a - b) / n;
    }
}

/// One ancestral reverse step given the predicted noise. Deterministic at
/// `t = 1` (zero posterior variance).
pub fn ddpm_reverse_step(
    x_t: &[f64],
    eps_hat: &[f64],
    t: u32,
    schedule: &GaussianSchedule,
    rng: &mut RngStream,
) -> Vec<f64> {
    let beta = schedule.beta(t);
    let ab = schedule.alpha_bar(t);
    let inv_sqrt_alpha = 1.0 / (1.0 - beta).sqrt();
    let noise_coef = beta / (1.0 - ab).sqrt();
    let sigma = schedule.posterior_variance(t).sqrt();
    x_t.iter()
        .zip(eps_hat)
        .map(|(x, e)| {
            let mean = inv_sqrt_alpha * (x - noise_coef * e);
            if sigma > 0.0 {
                mean + sigma * sample_std_normal(rng)
            } else {
                mean
            }
        })
        .collect()
}
