//! Reverse-chain generation for the three families.
//!
//! Count models start every chain at exactly zero and thicken for `T` steps;
//! the Gaussian baseline starts at standard normal noise and denoises. Chains
//! are generated in fixed-size chunks, each chunk on its own random stream
//! keyed by `(run, chunk)`, so output is byte-identical for any thread count
//! and chunk scheduling.

use crate::ddpm::{ddpm_reverse_step, GaussianSchedule, Rescaler};
use crate::error::{Error, Result};
use crate::nn::MlpModel;
use crate::process::{
    binjump_reverse_step, constrain_g, reverse_step, CountState, DataBatch, Domain,
};
use crate::rngdist::{sample_std_normal, RngStream};
use crate::schedule::ThinningSchedule;
use crate::streams::sample_stream;
use crate::train::Family;

/// How the final observation is decoded from the chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    /// `g(z_0 / lambda)`.
    GOfZ0,
    /// `g(f(z_1, 1))`, the prediction at the last step.
    FAtT1,
}

impl SampleMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "g_of_z0" => Ok(SampleMode::GOfZ0),
            "f_at_t1" => Ok(SampleMode::FAtT1),
            other => Err(Error::InvalidParameter(format!(
                "unknown sample mode '{other}'"
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SampleMode::GOfZ0 => "g_of_z0",
            SampleMode::FAtT1 => "f_at_t1",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SampleOptions {
    pub n: usize,
    /// Chains per chunk; chunking fixes the random-stream layout.
    pub chunk: usize,
    pub seed: u64,
    /// Independent-run index; distinct runs use disjoint streams.
    pub run: u32,
    pub mode: SampleMode,
    pub threads: usize,
}

impl SampleOptions {
    pub fn new(n: usize, seed: u64) -> Self {
        Self {
            n,
            chunk: 4096,
            seed,
            run: 0,
            mode: SampleMode::GOfZ0,
            threads: 1,
        }
    }
}

/// Generate from a count-model checkpoint (Poisson or binomial variant).
pub fn sample_count_model(
    family: Family,
    model: &MlpModel,
    schedule: &ThinningSchedule,
    domain: Domain,
    opts: &SampleOptions,
) -> Result<DataBatch> {
    if family == Family::Ddpm {
        return Err(Error::InvalidParameter(
            "sample_count_model does not handle the gaussian baseline".into(),
        ));
    }
    if opts.n == 0 {
        return Err(Error::InvalidParameter("need n >= 1 samples".into()));
    }
    let d = model.config.output_dim;
    let t_steps = schedule.t_steps();
    // The whole batch shares each step's timestep, so the per-block time
    // projections are computed once per step up front.
    let contexts: Vec<_> = (0..=t_steps).map(|t| model.time_context(t)).collect();

    let run_chunk = |chunk_idx: usize, rows: usize| -> Result<Vec<f64>> {
        let mut rng = RngStream::new(opts.seed, sample_stream(opts.run, chunk_idx as u32));
        let mut z = CountState::zeros(rows, d, t_steps);
        let mut last_pred: Vec<f64> = Vec::new();
        for t in (1..=t_steps).rev() {
            let ts = vec![t; rows];
            let features = model.scale_counts(z.counts(), &ts, rows, schedule);
            let pred = model.forward_shared(&features, &contexts[t as usize], rows)?;
            z = match family {
                Family::Jump => reverse_step(&z, &pred, schedule, &mut rng)?,
                Family::BinJump => binjump_reverse_step(&z, &pred, schedule, &mut rng)?,
                Family::Ddpm => unreachable!(),
            };
            if t == 1 {
                last_pred = pred;
            }
        }
        let decoded: Vec<f64> = match opts.mode {
            SampleMode::GOfZ0 => z
                .counts()
                .iter()
                .map(|&c| c as f64 / schedule.lambda())
                .collect(),
            SampleMode::FAtT1 => last_pred,
        };
        Ok(decoded)
    };

    let raw = run_chunks(opts, d, run_chunk)?;
    constrain_g(&raw, opts.n, d, domain)
}

/// Generate from a Gaussian-baseline checkpoint.
pub fn sample_ddpm(
    model: &MlpModel,
    schedule: &GaussianSchedule,
    rescaler: &Rescaler,
    domain: Domain,
    opts: &SampleOptions,
) -> Result<DataBatch> {
    if opts.n == 0 {
        return Err(Error::InvalidParameter("need n >= 1 samples".into()));
    }
    let d = model.config.output_dim;
    let t_steps = schedule.t_steps();
    let contexts: Vec<_> = (0..=t_steps).map(|t| model.time_context(t)).collect();

    let run_chunk = |chunk_idx: usize, rows: usize| -> Result<Vec<f64>> {
        let mut rng = RngStream::new(opts.seed, sample_stream(opts.run, chunk_idx as u32));
        let mut x: Vec<f64> = (0..rows * d).map(|_| sample_std_normal(&mut rng)).collect();
        for t in (1..=t_steps).rev() {
            let eps_hat = model.forward_shared(&x, &contexts[t as usize], rows)?;
            x = ddpm_reverse_step(&x, &eps_hat, t, schedule, &mut rng);
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!(
                    "gaussian reverse chain diverged at t = {t}"
                )));
            }
        }
        Ok(x.iter().map(|&v| rescaler.invert(v)).collect())
    };

    let raw = run_chunks(opts, d, run_chunk)?;
    constrain_g(&raw, opts.n, d, domain)
}

/// Run the per-chunk closure over all chunks, optionally on worker threads,
/// and splice results back in chunk order.
fn run_chunks(
    opts: &SampleOptions,
    d: usize,
    run_chunk: impl Fn(usize, usize) -> Result<Vec<f64>> + Sync,
) -> Result<Vec<f64>> {
    let chunk = opts.chunk.max(1);
    let n_chunks = opts.n.div_ceil(chunk);
    let rows_of = |c: usize| -> usize {
        if c + 1 == n_chunks { opts.n - c * chunk } else { chunk }
    };
    let mut pieces: Vec<Vec<f64>> = vec![Vec::new(); n_chunks];
    if opts.threads <= 1 || n_chunks == 1 {
        for (c, piece) in pieces.iter_mut().enumerate() {
            *piece = run_chunk(c, rows_of(c))?;
        }
    } else {
        let workers = opts.threads.min(n_chunks);
        let per = n_chunks.div_ceil(workers);
        let results: Vec<(usize, Result<Vec<f64>>)> = std::thread::scope(|scope| {
            let run = &run_chunk;
            let rows_of = &rows_of;
            let mut handles = Vec::new();
            for w in 0..workers {
                let lo = w * per;
                let hi = ((w + 1) * per).min(n_chunks);
                handles.push(scope.spawn(move || {
                    (lo..hi).map(|c| (c, run(c, rows_of(c)))).collect::<Vec<_>>()
                }));
            }
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("sampling worker panicked"))
                .collect()
        });
        for (c, res) in results {
            pieces[c] = res?;
        }
    }
    let mut out = Vec::with_capacity(opts.n * d);
    for piece in pieces {
        out.extend_from_slice(&piece);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{MlpConfig, OutputHead};

    fn pinned_model(value: f64) -> MlpModel {
        let cfg = MlpConfig {
            hidden: 8,
            time_embed_dim: 8,
            ..MlpConfig::new(1, OutputHead::Softplus)
        };
        let mut m = MlpModel::init(cfg, 1.0, &mut RngStream::new(2, 0)).unwrap();
        m.pinned_output = Some(value);
        m
    }

    #[test]
    fn zero_oracle_generates_exact_zeros() {
        let model = pinned_model(0.0);
        let s = ThinningSchedule::beta_linear(50, 0.01, 0.2, 10.0).unwrap();
        let out = sample_count_model(
            Family::Jump,
            &model,
            &s,
            Domain::Count,
            &SampleOptions::new(100, 7),
        )
        .unwrap();
        assert!(out.dense_values().unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_oracle_matches_superposition_law() {
        // With f pinned at c the chain accumulates Pois(lambda (1-alpha_T) c).
        let c = 2.0;
        let model = pinned_model(c);
        let s = ThinningSchedule::beta_linear(100, 0.01, 0.08, 10.0).unwrap();
        let mut opts = SampleOptions::new(100_000, 11);
        opts.mode = SampleMode::GOfZ0;
        // The non-negative domain keeps g the identity, so z_0 is recoverable.
        let out =
            sample_count_model(Family::Jump, &model, &s, Domain::NonnegReal, &opts).unwrap();
        let z0: Vec<u64> = out
            .dense_values()
            .unwrap()
            .iter()
            .map(|&v| (v * s.lambda()).round() as u64)
            .collect();
        let rate = s.lambda() * (1.0 - s.alpha(100)) * c;
        let p = crate::evaluation::chi_square_gof(&z0, |k| {
            crate::rngdist::poisson_pmf(k, rate).unwrap()
        });
        assert!(p > 0.01, "p = {p}");
    }

    #[test]
    fn chunking_and_threads_do_not_change_output() {
        let model = pinned_model(1.5);
        let s = ThinningSchedule::beta_linear(20, 0.01, 0.2, 10.0).unwrap();
        let base = SampleOptions { chunk: 64, ..SampleOptions::new(300, 3) };
        let a = sample_count_model(Family::Jump, &model, &s, Domain::Count, &base).unwrap();
        let threaded = SampleOptions { threads: 4, ..base.clone() };
        let b = sample_count_model(Family::Jump, &model, &s, Domain::Count, &threaded).unwrap();
        assert_eq!(a.dense_values().unwrap(), b.dense_values().unwrap());
    }

    #[test]
    fn distinct_runs_differ() {
        let model = pinned_model(1.5);
        let s = ThinningSchedule::beta_linear(20, 0.01, 0.2, 10.0).unwrap();
        let a = sample_count_model(
            Family::Jump,
            &model,
            &s,
            Domain::Count,
            &SampleOptions { run: 0, ..SampleOptions::new(500, 3) },
        )
        .unwrap();
        let b = sample_count_model(
            Family::Jump,
            &model,
            &s,
            Domain::Count,
            &SampleOptions { run: 1, ..SampleOptions::new(500, 3) },
        )
        .unwrap();
        assert_ne!(a.dense_values().unwrap(), b.dense_values().unwrap());
    }

    #[test]
    fn f_at_t1_mode_uses_the_last_prediction() {
        let model = pinned_model(2.4);
        let s = ThinningSchedule::beta_linear(10, 0.05, 0.3, 10.0).unwrap();
        let opts = SampleOptions { mode: SampleMode::FAtT1, ..SampleOptions::new(50, 5) };
        let out = sample_count_model(Family::Jump, &model, &s, Domain::Count, &opts).unwrap();
        // Count domain rounds the pinned 2.4 to 2.
        assert!(out.dense_values().unwrap().iter().all(|&v| v == 2.0));
    }

    #[test]
    fn ddpm_sampling_produces_finite_domain_values() {
        let cfg = MlpConfig {
            hidden: 8,
            time_embed_dim: 8,
            head: OutputHead::Linear,
            ..MlpConfig::new(1, OutputHead::Linear)
        };
        let model = MlpModel::init(cfg, 0.0, &mut RngStream::new(4, 0)).unwrap();
        let s = GaussianSchedule::beta_linear(50, 1e-4, 0.02).unwrap();
        let r = Rescaler { lo: 0.0, hi: 4.0 };
        let out = sample_ddpm(&model, &s, &r, Domain::NonnegReal, &SampleOptions::new(10_000, 6))
            .unwrap();
        assert!(out
            .dense_values()
            .unwrap()
            .iter()
            .all(|&v| v.is_finite() && v >= 0.0));
    }
}
