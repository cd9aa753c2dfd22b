//! Analytic and brute-force identity checks.
//!
//! These are runtime-executable oracles: factorization identities of the
//! bivariate count law, enumeration checks of both conditional posteriors,
//! the closed-form KL against truncated summation, the constant-oracle
//! superposition law of the reverse chain, and finite-difference gradient
//! fidelity of the composed loss. The `check` command runs them all and any
//! failure is a build-stopping defect.

use crate::error::Result;
use crate::evaluation::chi_square_gof;
use crate::nn::{InputScaling, MlpConfig, MlpModel, OutputHead};
use crate::objective::{jump_loss, jump_loss_grad, kl_shifted_poisson};
use crate::process::{reverse_step, CountState, DataBatch, Domain};
use crate::rngdist::{
    binomial_pmf, poisson_pmf, shifted_poisson_pmf, RngStream, ShiftedPoissonParams,
};
use crate::schedule::ThinningSchedule;
use crate::streams::{stream_id, Space};

/// How a check value relates to its bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bound {
    /// Pass when `value <= bound` (error magnitudes).
    AtMost,
    /// Pass when `value >= bound` (p-values).
    AtLeast,
}

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub kind: Bound,
    pub passed: bool,
    pub seconds: f64,
}

fn finish(name: &str, value: f64, bound: f64, kind: Bound, started: std::time::Instant) -> CheckResult {
    let passed = match kind {
        Bound::AtMost => value <= bound,
        Bound::AtLeast => value >= bound,
    };
    CheckResult {
        name: name.to_string(),
        value,
        bound,
        kind,
        passed,
        seconds: started.elapsed().as_secs_f64(),
    }
}

/// Both factorizations of the joint count law must agree:
/// `Binomial(y; x, pi) Pois(x; rate)` versus
/// `ShiftedPois_y(x; (1-pi) rate) Pois(y; pi rate)`.
pub fn lemma1_identity() -> CheckResult {
    let start = std::time::Instant::now();
    let mut max_err: f64 = 0.0;
    for &rate in &[0.5, 1.0, 5.0] {
        for &pi in &[0.1, 0.5, 0.9] {
            for x in 0..=30u64 {
                for y in 0..=x {
                    let lhs = binomial_pmf(y, x, pi).unwrap() * poisson_pmf(x, rate).unwrap();
                    let rhs = shifted_poisson_pmf(
                        x,
                        ShiftedPoissonParams { shift: y, rate: (1.0 - pi) * rate },
                    )
                    .unwrap()
                        * poisson_pmf(y, pi * rate).unwrap();
                    max_err = max_err.max((lhs - rhs).abs());
                }
            }
        }
    }
    finish("lemma1_factorization", max_err, 1e-12, Bound::AtMost, start)
}

/// Bayes-rule enumeration of the thinning posterior against the closed-form
/// shifted Poisson, optionally with the closed-form rate perturbed (used by a
/// sensitivity test to prove the check can fail).
pub fn posterior_enumeration_scaled(rate_perturbation: f64) -> CheckResult {
    let start = std::time::Instant::now();
    let mut max_err: f64 = 0.0;
    for &rate_prev in &[0.3, 1.0, 2.5, 5.0] {
        for &retention in &[0.2, 0.5, 0.9] {
            for z_t in 0..=30u64 {
                // Posterior over z_{t-1} = j given z_t, by normalizing
                // likelihood times prior over a wide truncated support.
                let j_max = z_t + 220;
                let mut numer = Vec::with_capacity((j_max - z_t + 1) as usize);
                let mut norm = 0.0;
                for j in z_t..=j_max {
                    let v = binomial_pmf(z_t, j, retention).unwrap()
                        * poisson_pmf(j, rate_prev).unwrap();
                    numer.push(v);
                    norm += v;
                }
                if norm == 0.0 {
                    continue;
                }
                let jump_rate = (1.0 - retention) * rate_prev * rate_perturbation;
                for (idx, v) in numer.iter().enumerate() {
                    let j = z_t + idx as u64;
                    let closed = shifted_poisson_pmf(
                        j,
                        ShiftedPoissonParams { shift: z_t, rate: jump_rate },
                    )
                    .unwrap();
                    max_err = max_err.max((v / norm - closed).abs());
                }
            }
        }
    }
    finish("posterior_bayes_enumeration", max_err, 1e-10, Bound::AtMost, start)
}

pub fn posterior_enumeration() -> CheckResult {
    posterior_enumeration_scaled(1.0)
}

/// Bayes-rule enumeration of the binomial-variant posterior against the
/// shifted binomial with `p_t = (alpha_prev - alpha_cur) / (1 - alpha_cur)`.
pub fn binjump_posterior_enumeration() -> CheckResult {
    let start = std::time::Instant::now();
    let mut max_err: f64 = 0.0;
    let alpha_pairs = [(0.9, 0.5), (0.5, 0.2), (0.8, 0.7), (0.3, 0.05), (0.99, 0.6)];
    for &(alpha_prev, alpha_cur) in &alpha_pairs {
        let retention = alpha_cur / alpha_prev;
        let p_t = (alpha_prev - alpha_cur) / (1.0 - alpha_cur);
        for x0 in 0..=12u64 {
            for z_t in 0..=x0 {
                let mut numer = Vec::with_capacity((x0 - z_t + 1) as usize);
                let mut norm = 0.0;
                for m in z_t..=x0 {
                    let v = binomial_pmf(m, x0, alpha_prev).unwrap()
                        * binomial_pmf(z_t, m, retention).unwrap();
                    numer.push(v);
                    norm += v;
                }
                if norm == 0.0 {
                    continue;
                }
                for (idx, v) in numer.iter().enumerate() {
                    let m = z_t + idx as u64;
                    let closed = binomial_pmf(m - z_t, x0 - z_t, p_t).unwrap();
                    max_err = max_err.max((v / norm - closed).abs());
                }
            }
        }
    }
    finish("binjump_posterior_bayes_enumeration", max_err, 1e-10, Bound::AtMost, start)
}

/// Closed-form per-step KL against direct truncated summation of the two
/// shifted-Poisson pmfs, over randomized parameter triples.
pub fn kl_analytic_vs_numeric(triples: usize, seed: u64) -> CheckResult {
    let start = std::time::Instant::now();
    let mut rng = RngStream::new(seed, stream_id(Space::Check, 1));
    let mut max_err: f64 = 0.0;
    for _ in 0..triples {
        let x0 = 0.05 + rng.next_f64() * 8.0;
        let f = 0.05 + rng.next_f64() * 8.0;
        let gap = 0.02 + rng.next_f64() * 4.0;
        let analytic = kl_shifted_poisson(x0, f, gap).unwrap();
        let (a, b) = (gap * x0, gap * f);
        let mut brute = 0.0;
        let mut cum = 0.0;
        let mut k = 0u64;
        while cum < 1.0 - 1e-14 && k < 100_000 {
            let p = poisson_pmf(k, a).unwrap();
            if p > 0.0 {
                brute += p * (p.ln() - poisson_pmf(k, b).unwrap().ln());
            }
            cum += p;
            k += 1;
        }
        max_err = max_err.max((analytic - brute).abs());
    }
    finish("kl_closed_form_vs_truncated_sum", max_err, 1e-8, Bound::AtMost, start)
}

/// Drive the reverse chain from zero with a constant prediction `c`; the
/// endpoint must be `Pois(lambda (1 - alpha_T) c)` by superposition of the
/// per-step jumps. Returns the goodness-of-fit p-value.
pub fn superposition_oracle(lambda: f64, c: f64, t_steps: u32, chains: usize, seed: u64) -> Result<CheckResult> {
    let start = std::time::Instant::now();
    let beta_end = crate::schedule::calibrate_end_snr(t_steps, 0.001, lambda, c.max(0.05), -12.0)
        .unwrap_or(0.05);
    let schedule = ThinningSchedule::beta_linear(t_steps, 0.001, beta_end, lambda)?;
    let mut rng = RngStream::new(seed, stream_id(Space::Check, 2));
    let d = 1usize;
    let mut endpoints = Vec::with_capacity(chains);
    let batch = 4096;
    let mut remaining = chains;
    while remaining > 0 {
        let rows = batch.min(remaining);
        let mut z = CountState::zeros(rows, d, t_steps);
        let pred = vec![c; rows];
        for _t in (1..=t_steps).rev() {
            z = reverse_step(&z, &pred, &schedule, &mut rng)?;
        }
        endpoints.extend_from_slice(z.counts());
        remaining -= rows;
    }
    let rate = lambda * (1.0 - schedule.alpha(t_steps)) * c;
    let p = chi_square_gof(&endpoints, |k| poisson_pmf(k, rate).unwrap());
    Ok(finish(
        &format!("superposition_oracle_lambda{lambda}_c{c}_T{t_steps}"),
        p,
        0.01,
        Bound::AtLeast,
        start,
    ))
}

/// Finite-difference fidelity of the full composed gradient (network through
/// the divergence loss) on a tiny model, in 64-bit arithmetic.
pub fn gradient_fidelity(seed: u64) -> Result<CheckResult> {
    let start = std::time::Instant::now();
    let schedule = ThinningSchedule::beta_linear(16, 0.01, 0.3, 10.0)?;
    let cfg = MlpConfig {
        input_dim: 2,
        output_dim: 2,
        hidden: 8,
        time_embed_dim: 8,
        head: OutputHead::Softplus,
        input_scaling: InputScaling::ByLambda,
    };
    let mut model = MlpModel::init(cfg, 1.2, &mut RngStream::new(seed, stream_id(Space::Check, 3)))?;
    let batch = 3usize;
    let z = vec![4u64, 0, 7, 2, 1, 9];
    let ts = vec![3u32, 9, 14];
    let x0 = DataBatch::dense(vec![1.0, 0.0, 2.5, 0.5, 0.0, 3.0], batch, 2, Domain::NonnegReal)?;
    let zs = CountState::new(z.clone(), batch, 2, 0)?;

    let loss_of = |m: &MlpModel| -> f64 {
        let (out, _) = m.forward_counts(&z, &ts, batch, &schedule).unwrap();
        jump_loss(&x0, &zs, &ts, &out).unwrap().mean
    };

    let (out, tape) = model.forward_counts(&z, &ts, batch, &schedule)?;
    let mut upstream = vec![0.0; batch * 2];
    jump_loss_grad(&x0, &out, &mut upstream)?;
    let analytic = model.backward(&tape, &upstream)?;

    let mut worst: f64 = 0.0;
    let h = 1e-5;
    let mut rng = RngStream::new(seed, stream_id(Space::Check, 4));
    for _ in 0..100 {
        let i = rng.next_index(model.n_params() as u64) as usize;
        let orig = model.params()[i];
        model.params_mut()[i] = orig + h;
        let lp = loss_of(&model);
        model.params_mut()[i] = orig - h;
        let lm = loss_of(&model);
        model.params_mut()[i] = orig;
        let fd = (lp - lm) / (2.0 * h);
        let denom = fd.abs().max(analytic[i].abs()).max(1e-6);
        worst = worst.max((fd - analytic[i]).abs() / denom);
    }
    Ok(finish("loss_gradient_finite_difference", worst, 1e-4, Bound::AtMost, start))
}

/// Exact total variation between `Binomial(50, 0.02)` and `Pois(1)`, the
/// approximation the binomial-variant reverse step leans on.
pub fn binomial_poisson_approximation() -> CheckResult {
    let start = std::time::Instant::now();
    let (n, p) = (50u64, 0.02);
    let rate = n as f64 * p;
    let mut l1 = 0.0;
    for k in 0..=n {
        l1 += (binomial_pmf(k, n, p).unwrap() - poisson_pmf(k, rate).unwrap()).abs();
    }
    // Poisson mass above n (the binomial has none there).
    let mut tail = 1.0;
    for k in 0..=n {
        tail -= poisson_pmf(k, rate).unwrap();
    }
    l1 += tail.max(0.0);
    finish("binomial_poisson_tv", 0.5 * l1, 0.02, Bound::AtMost, start)
}

/// The full identity suite, as run by the `check` command.
pub fn run_all(seed: u64) -> Result<Vec<CheckResult>> {
    Ok(vec![
        lemma1_identity(),
        posterior_enumeration(),
        binjump_posterior_enumeration(),
        kl_analytic_vs_numeric(1000, seed),
        superposition_oracle(10.0, 2.0, 1000, 100_000, seed)?,
        superposition_oracle(100.0, 0.5, 100, 100_000, seed)?,
        gradient_fidelity(seed)?,
        binomial_poisson_approximation(),
    ])
}
