//! Thinning-coefficient schedules.
//!
//! A schedule fixes the number of steps `T`, the count-scaling parameter
//! `lambda`, and the coefficients `alpha_0 = 1 > alpha_1 > ... > alpha_T > 0`
//! built from per-step removal probabilities `beta_t` via
//! `alpha_t = alpha_{t-1} (1 - beta_t)`. It is the single source of
//! diffusion-time truth for both training and generation.

use crate::error::{Error, Result};

pub const DEFAULT_T: u32 = 1000;
pub const DEFAULT_BETA1: f64 = 0.001;
pub const DEFAULT_LAMBDA: f64 = 10.0;
/// Log signal-to-noise ratio targeted at the end of the forward chain.
pub const DEFAULT_END_LOG_SNR: f64 = -12.0;

#[derive(Clone, Debug, PartialEq)]
pub struct ThinningSchedule {
    t_steps: u32,
    lambda: f64,
    /// `alpha_0 ..= alpha_T`, length `T + 1`.
    alphas: Vec<f64>,
    /// `beta_1 ..= beta_T`, length `T`.
    betas: Vec<f64>,
}

impl ThinningSchedule {
    /// Build a schedule whose removal probabilities interpolate linearly from
    /// `beta1` at `t = 1` to `beta_end` at `t = T`.
    pub fn beta_linear(t_steps: u32, beta1: f64, beta_end: f64, lambda: f64) -> Result<Self> {
        if t_steps == 0 {
            return Err(Error::InvalidParameter("schedule needs T >= 1".into()));
        }
        if !(beta1 > 0.0 && beta1 <= beta_end && beta_end < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < beta1 <= beta_end < 1, got beta1={beta1} beta_end={beta_end}"
            )));
        }
        let betas: Vec<f64> = if t_steps == 1 {
            vec![beta_end]
        } else {
            (0..t_steps)
                .map(|i| beta1 + (beta_end - beta1) * i as f64 / (t_steps - 1) as f64)
                .collect()
        };
        Self::from_betas(betas, lambda)
    }

    /// Build from explicit per-step removal probabilities.
    pub fn from_betas(betas: Vec<f64>, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        if betas.is_empty() {
            return Err(Error::InvalidParameter("schedule needs T >= 1".into()));
        }
        let mut alphas = Vec::with_capacity(betas.len() + 1);
        alphas.push(1.0);
        for (i, &b) in betas.iter().enumerate() {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "beta_{} = {b} outside (0, 1)",
                    i + 1
                )));
            }
            let next = alphas[i] * (1.0 - b);
            alphas.push(next);
        }
        let schedule = Self {
            t_steps: betas.len() as u32,
            lambda,
            alphas,
            betas,
        };
        schedule.validate()?;
        Ok(schedule)
    }

    /// Rebuild from stored arrays (checkpoint loading). The arrays are taken
    /// verbatim, not re-derived, and must satisfy every schedule invariant.
    pub fn from_arrays(lambda: f64, alphas: Vec<f64>, betas: Vec<f64>) -> Result<Self> {
        if alphas.len() != betas.len() + 1 {
            return Err(Error::InvalidParameter(format!(
                "alphas must have one more entry than betas, got {} and {}",
                alphas.len(),
                betas.len()
            )));
        }
        let schedule = Self {
            t_steps: betas.len() as u32,
            lambda,
            alphas,
            betas,
        };
        schedule.validate()?;
        Ok(schedule)
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::InvalidParameter("lambda must be positive".into()));
        }
        if self.alphas[0] != 1.0 {
            return Err(Error::InvalidParameter(format!(
                "alpha_0 must be exactly 1, got {}",
                self.alphas[0]
            )));
        }
        for t in 1..self.alphas.len() {
            let (prev, cur) = (self.alphas[t - 1], self.alphas[t]);
            if !(cur > 0.0 && cur < prev) {
                return Err(Error::InvalidParameter(format!(
                    "alphas must be strictly decreasing and positive, alpha_{} = {cur}",
                    t
                )));
            }
            let retention = 1.0 - self.betas[t - 1];
            if !(retention > 0.0 && retention < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "retention at t = {t} outside (0, 1)"
                )));
            }
        }
        // Telescoping: the gaps must add back up to 1 - alpha_T.
        let gap_sum: f64 = (1..=self.t_steps).map(|t| self.gap(t)).sum();
        let expected = 1.0 - self.alpha(self.t_steps);
        if (gap_sum - expected).abs() > 1e-12 {
            return Err(Error::Numeric(format!(
                "telescoping violated: sum of gaps {gap_sum} vs {expected}"
            )));
        }
        Ok(())
    }

    pub fn t_steps(&self) -> u32 {
        self.t_steps
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `alpha_t` for `t` in `0..=T`.
    pub fn alpha(&self, t: u32) -> f64 {
        self.alphas[t as usize]
    }

    /// Survival ratio `alpha_t / alpha_{t-1} = 1 - beta_t` for `t` in `1..=T`.
    pub fn retention(&self, t: u32) -> f64 {
        assert!((1..=self.t_steps).contains(&t), "t = {t} outside 1..=T");
        1.0 - self.betas[t as usize - 1]
    }

    /// `alpha_{t-1} - alpha_t` for `t` in `1..=T`.
    pub fn gap(&self, t: u32) -> f64 {
        assert!((1..=self.t_steps).contains(&t), "t = {t} outside 1..=T");
        self.alphas[t as usize - 1] - self.alphas[t as usize]
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    /// `ln(lambda * alpha_T * mean_x0)`, the log-SNR at the end of the chain.
    pub fn end_log_snr(&self, mean_x0: f64) -> f64 {
        (self.lambda * self.alpha(self.t_steps) * mean_x0).ln()
    }
}

/// Solve for the `beta_end` of a beta-linear schedule such that the end
/// log-SNR `ln(lambda * alpha_T * mean_x0)` hits `target_log_snr`.
///
/// Bisection on `beta_end` in `(beta1, 1)`; `ln alpha_T` is strictly
/// decreasing in `beta_end`, so the root is unique when it exists. The
/// achieved log-SNR is required to land within 0.05 of the target.
pub fn calibrate_end_snr(
    t_steps: u32,
    beta1: f64,
    lambda: f64,
    mean_x0: f64,
    target_log_snr: f64,
) -> Result<f64> {
    if t_steps == 0 {
        return Err(Error::InvalidParameter("schedule needs T >= 1".into()));
    }
    if !(beta1 > 0.0 && beta1 < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "beta1 must lie in (0, 1), got {beta1}"
        )));
    }
    if !(mean_x0.is_finite() && mean_x0 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "mean_x0 must be positive, got {mean_x0}"
        )));
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    // ln alpha_T as a function of beta_end, without building the full arrays.
    let ln_alpha_t = |beta_end: f64| -> f64 {
        if t_steps == 1 {
            return (1.0 - beta_end).ln();
        }
        let step = (beta_end - beta1) / (t_steps - 1) as f64;
        (0..t_steps)
            .map(|i| (1.0 - (beta1 + step * i as f64)).ln())
            .sum()
    };
    let needed = target_log_snr - (lambda * mean_x0).ln();
    let attainable_max = ln_alpha_t(beta1) + (lambda * mean_x0).ln();
    if target_log_snr >= attainable_max {
        return Err(Error::Calibration(format!(
            "target log-SNR {target_log_snr} not attainable; with beta1 = {beta1} the \
             achievable range is (-inf, {attainable_max:.6})"
        )));
    }
    let (mut lo, mut hi) = (beta1, 1.0 - 1e-12);
    if ln_alpha_t(hi) > needed {
        return Err(Error::Calibration(format!(
            "target log-SNR {target_log_snr} below the attainable range even at beta_end -> 1"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ln_alpha_t(mid) > needed {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    let beta_end = 0.5 * (lo + hi);
    let achieved = ln_alpha_t(beta_end) + (lambda * mean_x0).ln();
    if (achieved - target_log_snr).abs() > 0.05 {
        return Err(Error::Calibration(format!(
            "bisection landed at log-SNR {achieved}, more than 0.05 from target {target_log_snr}"
        )));
    }
    Ok(beta_end)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_step_schedule() {
        let s = ThinningSchedule::beta_linear(1, 0.5, 0.5, 10.0).unwrap();
        assert_eq!(s.alphas(), &[1.0, 0.5]);
        assert_eq!(s.gap(1), 0.5);
    }

    #[test]
    fn two_step_schedule_values() {
        let s = ThinningSchedule::beta_linear(2, 0.1, 0.3, 10.0).unwrap();
        assert!((s.alpha(1) - 0.9).abs() < 1e-15);
        assert!((s.alpha(2) - 0.63).abs() < 1e-15);
        assert!((s.gap(1) - 0.1).abs() < 1e-15);
        assert!((s.gap(2) - 0.27).abs() < 1e-15);
    }

    #[test]
    fn gaps_telescope() {
        let s = ThinningSchedule::beta_linear(1000, 0.001, 0.02, 10.0).unwrap();
        let total: f64 = (1..=1000).map(|t| s.gap(t)).sum();
        assert!((total - (1.0 - s.alpha(1000))).abs() < 1e-12);
    }

    #[test]
    fn monotone_and_positive() {
        let s = ThinningSchedule::beta_linear(500, 0.001, 0.05, 100.0).unwrap();
        for t in 1..=500 {
            assert!(s.alpha(t) > 0.0);
            assert!(s.alpha(t) < s.alpha(t - 1));
            let r = s.retention(t);
            assert!(r > 0.0 && r < 1.0);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(ThinningSchedule::beta_linear(0, 0.1, 0.2, 10.0).is_err());
        assert!(ThinningSchedule::beta_linear(10, 0.0, 0.2, 10.0).is_err());
        assert!(ThinningSchedule::beta_linear(10, 0.3, 0.2, 10.0).is_err());
        assert!(ThinningSchedule::beta_linear(10, 0.1, 1.0, 10.0).is_err());
        assert!(ThinningSchedule::beta_linear(10, 0.1, 0.2, 0.0).is_err());
        assert!(ThinningSchedule::beta_linear(10, 0.1, 0.2, -1.0).is_err());
    }

    #[test]
    fn calibration_matches_analytic_alpha() {
        // lambda * alpha_T * mean = e^target  =>  alpha_T = e^-12 / 5.
        let beta_end = calibrate_end_snr(1000, 0.001, 10.0, 0.5, -12.0).unwrap();
        let s = ThinningSchedule::beta_linear(1000, 0.001, beta_end, 10.0).unwrap();
        let analytic = (-12.0f64).exp() / 5.0;
        assert!((analytic - 1.2288e-6).abs() < 1e-10);
        assert!(
            (s.alpha(1000) / analytic - 1.0).abs() < 1e-6,
            "alpha_T = {} vs {analytic}",
            s.alpha(1000)
        );
        assert!((s.end_log_snr(0.5) + 12.0).abs() <= 0.05);
    }

    #[test]
    fn calibration_hits_target_for_poismix_mean() {
        let mean = 10.9;
        let beta_end = calibrate_end_snr(1000, 0.001, 10.0, mean, -12.0).unwrap();
        let s = ThinningSchedule::beta_linear(1000, 0.001, beta_end, 10.0).unwrap();
        assert!((s.end_log_snr(mean) + 12.0).abs() <= 0.05);
    }

    #[test]
    fn calibration_boundary_target_errors() {
        // target = ln(lambda * mean) needs alpha_T = 1, which no schedule reaches.
        let target = (10.0f64 * 0.5).ln();
        let err = calibrate_end_snr(1000, 0.001, 10.0, 0.5, target);
        assert!(matches!(err, Err(Error::Calibration(_))));
    }

    #[test]
    fn calibration_is_monotone_in_target() {
        let b_low = calibrate_end_snr(100, 0.001, 10.0, 1.0, -14.0).unwrap();
        let b_high = calibrate_end_snr(100, 0.001, 10.0, 1.0, -8.0).unwrap();
        assert!(b_low > b_high, "larger target must need smaller beta_end");
    }
}
