//! Mini-batch training loops for the three model families.
//!
//! Per step, each example draws a uniform timestep and a single-shot marginal
//! latent (Poisson for the count models, Gaussian corruption for the
//! baseline), the network predicts, and Adam descends the family's loss.
//!
//! Determinism: every random draw comes from a stream keyed by the master
//! seed and the global step (or epoch, for shuffling), and gradient
//! accumulation always runs over fixed-size example shards reduced in shard
//! order. Results are therefore byte-identical for any worker-thread count,
//! and a run can resume from an epoch checkpoint and reproduce the
//! uninterrupted trajectory exactly.

use std::time::Instant;

use crate::ddpm::{GaussianSchedule, Rescaler};
use crate::error::{Error, Result};
use crate::nn::{adam_step, AdamConfig, AdamState, MlpModel, TimeEmbedding};
use crate::objective::{re_grad, re_value};
use crate::process::{binjump_p, DataBatch};
use crate::rngdist::{sample_binomial, sample_poisson, sample_std_normal, RngStream};
use crate::schedule::ThinningSchedule;
use crate::streams::{stream_id, Space};

/// Which generative process the model is trained for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Jump,
    BinJump,
    Ddpm,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Jump => "jump",
            Family::BinJump => "binjump",
            Family::Ddpm => "ddpm",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "jump" => Ok(Family::Jump),
            "binjump" => Ok(Family::BinJump),
            "ddpm" => Ok(Family::Ddpm),
            other => Err(Error::InvalidParameter(format!(
                "unknown model family '{other}'"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOptions {
    pub batch_size: usize,
    pub epochs: u64,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Worker threads for shard execution; 1 is strict serial mode. Any
    /// value produces identical results.
    pub threads: usize,
    /// First epoch to run (non-zero when resuming from a checkpoint).
    pub start_epoch: u64,
}

/// Fixed shard width for gradient accumulation.
const SHARD: usize = 64;

/// One metrics record per optimizer step.
pub struct StepRecord {
    pub step: u64,
    pub loss: f64,
    pub elapsed_sec: f64,
}

pub struct TrainOutcome {
    pub model: MlpModel,
    pub adam_state: AdamState,
    pub global_step: u64,
    pub epochs_run: u64,
    pub final_loss: f64,
}

/// The per-family batch context a shard worker needs.
enum StepKind<'a> {
    Jump {
        schedule: &'a ThinningSchedule,
        z: &'a [u64],
    },
    BinJump {
        schedule: &'a ThinningSchedule,
        z: &'a [u64],
    },
    Ddpm {
        x_t: &'a [f64],
        eps: &'a [f64],
    },
}

/// Train a model of any family.
///
/// `schedule` must match the family (`thinning` for the count models,
/// `gaussian` plus `rescaler` for the baseline). `on_epoch` runs after every
/// epoch with `(epoch_just_finished, model, adam_state, global_step)`;
/// checkpoint writers hook in there. `on_step` receives one record per
/// optimizer step for the metrics log.
#[allow(clippy::too_many_arguments)]
pub fn train(
    family: Family,
    data: &DataBatch,
    thinning: Option<&ThinningSchedule>,
    gaussian: Option<&GaussianSchedule>,
    rescaler: Option<&Rescaler>,
    mut model: MlpModel,
    mut adam_state: AdamState,
    opts: &TrainOptions,
    on_step: &mut dyn FnMut(StepRecord),
    on_epoch: &mut dyn FnMut(u64, &MlpModel, &AdamState, u64) -> Result<()>,
) -> Result<TrainOutcome> {
    let n = data.rows();
    let d = data.cols();
    if n == 0 {
        return Err(Error::Shape("cannot train on an empty dataset".into()));
    }
    if model.config.input_dim != d || model.config.output_dim != d {
        return Err(Error::Shape(format!(
            "model is {}-dimensional, data is {d}-dimensional",
            model.config.input_dim
        )));
    }
    let batch_size = opts.batch_size.max(1).min(n);
    let t_steps = match family {
        Family::Jump | Family::BinJump => {
            thinning
                .ok_or_else(|| Error::InvalidParameter("count families need a thinning schedule".into()))?
                .t_steps()
        }
        Family::Ddpm => {
            gaussian
                .ok_or_else(|| Error::InvalidParameter("ddpm needs a gaussian schedule".into()))?
                .t_steps()
        }
    };
    if family == Family::Ddpm && rescaler.is_none() {
        return Err(Error::InvalidParameter("ddpm needs a fitted rescaler".into()));
    }
    if family == Family::BinJump && !data.domain().is_count_valued() {
        return Err(Error::Domain(
            "the binomial variant trains on count data only".into(),
        ));
    }

    let embeddings = TimeEmbedding::new(t_steps, model.config.time_embed_dim)?;
    let steps_per_epoch = n.div_ceil(batch_size) as u64;
    let mut global_step = opts.start_epoch * steps_per_epoch;
    let start = Instant::now();
    let mut last_loss = f64::NAN;

    let mut x0 = vec![0.0; batch_size * d];
    let mut ts = vec![0u32; batch_size];
    let mut z = vec![0u64; batch_size * d];
    let mut x_t = vec![0.0; batch_size * d];
    let mut eps = vec![0.0; batch_size * d];

    for epoch in opts.start_epoch..opts.epochs {
        let order = shuffled_indices(n, opts.seed, epoch);
        for chunk in order.chunks(batch_size) {
            let b = chunk.len();
            let mut rng = RngStream::new(opts.seed, stream_id(Space::TrainStep, global_step));

            // Gather the batch and draw its latents in a fixed order.
            for (i, &row) in chunk.iter().enumerate() {
                data.row_dense_into(row, &mut x0[i * d..(i + 1) * d]);
            }
            for t in ts.iter_mut().take(b) {
                *t = rng.next_index(t_steps as u64) as u32 + 1;
            }
            let kind = match family {
                Family::Jump => {
                    let s = thinning.unwrap();
                    for i in 0..b {
                        let rate_scale = s.lambda() * s.alpha(ts[i]);
                        for j in 0..d {
                            z[i * d + j] = sample_poisson(rate_scale * x0[i * d + j], &mut rng)?;
                        }
                    }
                    StepKind::Jump { schedule: s, z: &z }
                }
                Family::BinJump => {
                    let s = thinning.unwrap();
                    for i in 0..b {
                        let alpha = s.alpha(ts[i]);
                        for j in 0..d {
                            z[i * d + j] =
                                sample_binomial(x0[i * d + j] as u64, alpha, &mut rng)?;
                        }
                    }
                    StepKind::BinJump { schedule: s, z: &z }
                }
                Family::Ddpm => {
                    let s = gaussian.unwrap();
                    let r = rescaler.unwrap();
                    for i in 0..b {
                        let ab = s.alpha_bar(ts[i]);
                        let (sa, sn) = (ab.sqrt(), (1.0 - ab).sqrt());
                        for j in 0..d {
                            let e = sample_std_normal(&mut rng);
                            eps[i * d + j] = e;
                            x_t[i * d + j] = sa * r.apply(x0[i * d + j]) + sn * e;
                        }
                    }
                    StepKind::Ddpm { x_t: &x_t, eps: &eps }
                }
            };

            let (loss, grads) = batch_gradients(
                &model,
                &embeddings,
                &x0[..b * d],
                &ts[..b],
                b,
                &kind,
                opts.threads,
            )?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "training diverged at step {global_step} (loss = {loss})"
                )));
            }
            adam_step(model.params_mut(), &grads, &mut adam_state, &opts.adam);
            global_step += 1;
            last_loss = loss;
            on_step(StepRecord {
                step: global_step,
                loss,
                elapsed_sec: start.elapsed().as_secs_f64(),
            });
        }
        on_epoch(epoch + 1, &model, &adam_state, global_step)?;
    }

    Ok(TrainOutcome {
        model,
        adam_state,
        global_step,
        epochs_run: opts.epochs,
        final_loss: last_loss,
    })
}

/// Fisher-Yates with a per-epoch stream; independent of everything else.
pub fn shuffled_indices(n: usize, seed: u64, epoch: u64) -> Vec<usize> {
    let mut rng = RngStream::new(seed, stream_id(Space::Shuffle, epoch));
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.next_index(i as u64 + 1) as usize;
        order.swap(i, j);
    }
    order
}

/// Forward, loss gradient and backward over fixed shards; returns the batch
/// loss mean and the summed parameter gradients.
fn batch_gradients(
    model: &MlpModel,
    embeddings: &TimeEmbedding,
    x0: &[f64],
    ts: &[u32],
    batch: usize,
    kind: &StepKind,
    threads: usize,
) -> Result<(f64, Vec<f64>)> {
    let d = model.config.output_dim;
    let n_shards = batch.div_ceil(SHARD);
    let mut shard_grads: Vec<Vec<f64>> = vec![Vec::new(); n_shards];
    let mut shard_losses = vec![0.0f64; n_shards];

    let run_shard = |s: usize| -> Result<(Vec<f64>, f64)> {
        let lo = s * SHARD;
        let hi = (lo + SHARD).min(batch);
        let rows = hi - lo;
        let ts_s = &ts[lo..hi];
        let x0_s = &x0[lo * d..hi * d];
        let mut emb = vec![0.0; rows * model.config.time_embed_dim];
        embeddings.gather(ts_s, &mut emb);
        let scale = 1.0 / (batch * d) as f64;

        match kind {
            StepKind::Jump { schedule, z } => {
                let z_s = &z[lo * d..hi * d];
                let features = model.scale_counts(z_s, ts_s, rows, schedule);
                let (out, tape) = model.forward_features(&features, &emb, rows)?;
                let mut upstream = vec![0.0; rows * d];
                let mut loss_sum = 0.0;
                for i in 0..rows * d {
                    loss_sum += re_value(x0_s[i], out[i]);
                    upstream[i] = re_grad(x0_s[i], out[i]) * scale;
                }
                finish_shard(model, &tape, &upstream, loss_sum / d as f64)
            }
            StepKind::BinJump { schedule, z } => {
                let z_s = &z[lo * d..hi * d];
                let features = model.scale_counts(z_s, ts_s, rows, schedule);
                let (out, tape) = model.forward_features(&features, &emb, rows)?;
                let mut upstream = vec![0.0; rows * d];
                let mut loss_sum = 0.0;
                for i in 0..rows {
                    let p_t = binjump_p(schedule, ts_s[i]);
                    for j in 0..d {
                        let idx = i * d + j;
                        let zv = z_s[idx] as f64;
                        let target = x0_s[idx] - zv;
                        let resid = out[idx] - zv;
                        if target == 0.0 && resid <= 0.0 {
                            continue;
                        }
                        loss_sum += p_t * re_value(target, resid.max(0.0));
                        upstream[idx] = if resid <= 0.0 {
                            0.0
                        } else {
                            p_t * re_grad(target, resid) * scale
                        };
                    }
                }
                finish_shard(model, &tape, &upstream, loss_sum / d as f64)
            }
            StepKind::Ddpm { x_t, eps } => {
                let xt_s = &x_t[lo * d..hi * d];
                let eps_s = &eps[lo * d..hi * d];
                let (out, tape) = model.forward_features(xt_s, &emb, rows)?;
                let mut upstream = vec![0.0; rows * d];
                let mut loss_sum = 0.0;
                for i in 0..rows * d {
                    let diff = out[i] - eps_s[i];
                    loss_sum += diff * diff;
                    upstream[i] = 2.0 * diff * scale;
                }
                finish_shard(model, &tape, &upstream, loss_sum / d as f64)
            }
        }
    };

    if threads <= 1 || n_shards == 1 {
        for s in 0..n_shards {
            let (g, l) = run_shard(s)?;
            shard_grads[s] = g;
            shard_losses[s] = l;
        }
    } else {
        let workers = threads.min(n_shards);
        let results: Vec<Result<(Vec<f64>, f64)>> = std::thread::scope(|scope| {
            let mut handles = Vec::with_capacity(n_shards);
            let run = &run_shard;
            let per = n_shards.div_ceil(workers);
            for w in 0..workers {
                let lo = w * per;
                let hi = ((w + 1) * per).min(n_shards);
                handles.push(scope.spawn(move || (lo..hi).map(run).collect::<Vec<_>>()));
            }
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("shard worker panicked"))
                .collect()
        });
        for (s, res) in results.into_iter().enumerate() {
            let (g, l) = res?;
            shard_grads[s] = g;
            shard_losses[s] = l;
        }
    }

    // Reduce in shard order so the sum is independent of scheduling.
    let mut total = vec![0.0; model.n_params()];
    for g in &shard_grads {
        for (t, v) in total.iter_mut().zip(g) {
            *t += v;
        }
    }
    let loss = shard_losses.iter().sum::<f64>() / batch as f64;
    Ok((loss, total))
}

fn finish_shard(
    model: &MlpModel,
    tape: &crate::nn::Tape,
    upstream: &[f64],
    loss_sum: f64,
) -> Result<(Vec<f64>, f64)> {
    let grads = model.backward(tape, upstream)?;
    Ok((grads, loss_sum))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{MlpConfig, OutputHead};
    use crate::process::Domain;

    fn tiny_setup() -> (DataBatch, ThinningSchedule, MlpModel) {
        let data = DataBatch::univariate(
            (0..200).map(|i| (i % 5) as f64).collect(),
            Domain::Count,
        )
        .unwrap();
        let schedule = ThinningSchedule::beta_linear(20, 0.01, 0.3, 10.0).unwrap();
        let cfg = MlpConfig {
            hidden: 16,
            time_embed_dim: 8,
            ..MlpConfig::new(1, OutputHead::Softplus)
        };
        let model = MlpModel::init(cfg, data.mean(), &mut RngStream::new(5, 0)).unwrap();
        (data, schedule, model)
    }

    fn run_training(threads: usize, epochs: u64) -> (Vec<f64>, Vec<f64>) {
        let (data, schedule, model) = tiny_setup();
        let opts = TrainOptions {
            batch_size: 96,
            epochs,
            adam: AdamConfig::default(),
            seed: 123,
            threads,
            start_epoch: 0,
        };
        let adam = AdamState::new(model.n_params());
        let mut losses = Vec::new();
        let outcome = train(
            Family::Jump,
            &data,
            Some(&schedule),
            None,
            None,
            model,
            adam,
            &opts,
            &mut |rec| losses.push(rec.loss),
            &mut |_, _, _, _| Ok(()),
        )
        .unwrap();
        (outcome.model.params().to_vec(), losses)
    }

    #[test]
    fn serial_reruns_are_bit_identical() {
        let (p1, l1) = run_training(1, 3);
        let (p2, l2) = run_training(1, 3);
        assert_eq!(p1, p2);
        assert_eq!(l1, l2);
    }

    #[test]
    fn threaded_run_matches_serial_exactly() {
        let (p1, l1) = run_training(1, 2);
        let (p4, l4) = run_training(4, 2);
        assert_eq!(p1, p4);
        assert_eq!(l1, l4);
    }

    #[test]
    fn resume_reproduces_uninterrupted_trajectory() {
        let (data, schedule, model) = tiny_setup();
        let adam = AdamState::new(model.n_params());
        let mk_opts = |start: u64, end: u64| TrainOptions {
            batch_size: 96,
            epochs: end,
            adam: AdamConfig::default(),
            seed: 99,
            threads: 1,
            start_epoch: start,
        };
        let full = train(
            Family::Jump,
            &data,
            Some(&schedule),
            None,
            None,
            model.clone(),
            adam.clone(),
            &mk_opts(0, 4),
            &mut |_| {},
            &mut |_, _, _, _| Ok(()),
        )
        .unwrap();

        let half = train(
            Family::Jump,
            &data,
            Some(&schedule),
            None,
            None,
            model,
            adam,
            &mk_opts(0, 2),
            &mut |_| {},
            &mut |_, _, _, _| Ok(()),
        )
        .unwrap();
        let resumed = train(
            Family::Jump,
            &data,
            Some(&schedule),
            None,
            None,
            half.model,
            half.adam_state,
            &mk_opts(2, 4),
            &mut |_| {},
            &mut |_, _, _, _| Ok(()),
        )
        .unwrap();
        assert_eq!(full.model.params(), resumed.model.params());
        assert_eq!(full.global_step, resumed.global_step);
    }

    #[test]
    fn zero_epochs_returns_initial_model() {
        let (data, schedule, model) = tiny_setup();
        let before = model.params().to_vec();
        let adam = AdamState::new(model.n_params());
        let opts = TrainOptions {
            batch_size: 32,
            epochs: 0,
            adam: AdamConfig::default(),
            seed: 1,
            threads: 1,
            start_epoch: 0,
        };
        let out = train(
            Family::Jump,
            &data,
            Some(&schedule),
            None,
            None,
            model,
            adam,
            &opts,
            &mut |_| {},
            &mut |_, _, _, _| Ok(()),
        )
        .unwrap();
        assert_eq!(out.model.params(), &before[..]);
        assert_eq!(out.global_step, 0);
    }

    #[test]
    fn loss_decreases_on_average() {
        let (_, losses) = run_training(1, 30);
        let early: f64 = losses[..10].iter().sum::<f64>() / 10.0;
        let n = losses.len();
        let late: f64 = losses[n - 10..].iter().sum::<f64>() / 10.0;
        assert!(
            late < early,
            "loss did not decrease: early {early}, late {late}"
        );
    }

    #[test]
    fn shuffle_is_a_permutation_and_varies_by_epoch() {
        let a = shuffled_indices(100, 7, 0);
        let b = shuffled_indices(100, 7, 1);
        let mut sorted = a.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..100).collect::<Vec<_>>());
        assert_ne!(a, b);
        assert_eq!(a, shuffled_indices(100, 7, 0));
    }
}
