//! The denoiser `f(z_t, t)`: a three-block MLP over a flat `f64` parameter
//! vector.
//!
//! Each block runs `linear -> add time projection -> layer norm ->
//! leaky ReLU -> linear`; the head keeps the output in the range the domain
//! needs (softplus for non-negative targets, scaled sigmoid for the unit
//! interval, identity for the Gaussian baseline). Reverse-mode gradients are
//! exact, and the whole model lives in one parameter vector so the optimizer,
//! checkpointing and finite-difference checks all operate on plain slices.

pub mod adam;
pub mod embedding;
pub mod linalg;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use embedding::{time_embedding, TimeEmbedding};

use crate::error::{Error, Result};
use crate::rngdist::{sample_std_normal, RngStream};
use crate::schedule::ThinningSchedule;

pub const LEAKY_SLOPE: f64 = 0.01;
const LN_EPS: f64 = 1e-5;
pub const N_BLOCKS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutputHead {
    /// `ln(1 + e^u)`, strictly positive.
    Softplus,
    /// `scale * sigmoid(u)`, in `(0, scale)`.
    SigmoidScaled { scale: f64 },
    /// Identity, for the epsilon-prediction baseline.
    Linear,
}

/// How latent counts are turned into network inputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputScaling {
    /// `z / lambda`; the time embedding carries the schedule position.
    ByLambda,
    /// `z / (lambda * alpha_t)`, an unbiased estimate of the clean value.
    Unbiased,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub output_dim: usize,
    pub hidden: usize,
    pub time_embed_dim: usize,
    pub head: OutputHead,
    pub input_scaling: InputScaling,
}

impl MlpConfig {
    pub fn new(dim: usize, head: OutputHead) -> Self {
        Self {
            input_dim: dim,
            output_dim: dim,
            hidden: 128,
            time_embed_dim: 128,
            head,
            input_scaling: InputScaling::ByLambda,
        }
    }
}

/// One named tensor inside the flat parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn build_layout(cfg: &MlpConfig) -> Vec<TensorSpec> {
    let mut specs = Vec::new();
    let mut offset = 0usize;
    let mut push = |name: String, rows: usize, cols: usize, offset: &mut usize| {
        specs.push(TensorSpec { name, rows, cols, offset: *offset });
        *offset += rows * cols;
    };
    for b in 0..N_BLOCKS {
        let in_dim = if b == 0 { cfg.input_dim } else { cfg.hidden };
        let out_dim = if b == N_BLOCKS - 1 { cfg.output_dim } else { cfg.hidden };
        push(format!("block{b}.linear1.weight"), cfg.hidden, in_dim, &mut offset);
        push(format!("block{b}.linear1.bias"), cfg.hidden, 1, &mut offset);
        push(format!("block{b}.time_proj.weight"), cfg.hidden, cfg.time_embed_dim, &mut offset);
        push(format!("block{b}.time_proj.bias"), cfg.hidden, 1, &mut offset);
        push(format!("block{b}.norm.scale"), cfg.hidden, 1, &mut offset);
        push(format!("block{b}.norm.offset"), cfg.hidden, 1, &mut offset);
        push(format!("block{b}.linear2.weight"), out_dim, cfg.hidden, &mut offset);
        push(format!("block{b}.linear2.bias"), out_dim, 1, &mut offset);
    }
    specs
}

// Tensor indices within one block, in layout order.
const T_LIN1_W: usize = 0;
const T_LIN1_B: usize = 1;
const T_PROJ_W: usize = 2;
const T_PROJ_B: usize = 3;
const T_NORM_SCALE: usize = 4;
const T_NORM_OFFSET: usize = 5;
const T_LIN2_W: usize = 6;
const T_LIN2_B: usize = 7;
const TENSORS_PER_BLOCK: usize = 8;

/// The denoiser model.
#[derive(Clone, Debug)]
pub struct MlpModel {
    pub config: MlpConfig,
    /// Pin the forward output to a constant, bypassing the network. Used by
    /// oracle tests and diagnostics; serialized with the model.
    pub pinned_output: Option<f64>,
    params: Vec<f64>,
    layout: Vec<TensorSpec>,
}

/// Per-block time-projection outputs for one timestep, shared across a
/// sampling batch.
#[derive(Clone, Debug)]
pub struct SharedTimeContext {
    pub t: u32,
    per_block: Vec<Vec<f64>>,
}

/// Activations recorded by the forward pass for the backward pass.
#[derive(Clone, Debug)]
pub struct Tape {
    batch: usize,
    pinned: bool,
    emb: Vec<f64>,
    blocks: Vec<BlockTape>,
    head_pre: Vec<f64>,
}

#[derive(Clone, Debug)]
struct BlockTape {
    /// What the block's first linear consumed (the previous block's output).
    input: Vec<f64>,
    /// Normalized activations before scale/offset.
    norm: Vec<f64>,
    /// Reciprocal standard deviation per example.
    inv_std: Vec<f64>,
    /// Post-norm pre-activation values (the leaky ReLU input).
    post_ln: Vec<f64>,
    /// Output of the activation, input of the second linear.
    act: Vec<f64>,
}

impl MlpModel {
    /// Initialize with Kaiming fan-in scaling on hidden linears, a damped
    /// final linear, and a final bias placing the head output near
    /// `output_mean`.
    pub fn init(config: MlpConfig, output_mean: f64, rng: &mut RngStream) -> Result<Self> {
        if config.input_dim == 0 || config.output_dim == 0 || config.hidden == 0 {
            return Err(Error::InvalidParameter("model dims must be positive".into()));
        }
        if config.time_embed_dim < 2 || config.time_embed_dim % 2 != 0 {
            return Err(Error::InvalidParameter(
                "time_embed_dim must be even and >= 2".into(),
            ));
        }
        let layout = build_layout(&config);
        let n_params = layout.iter().map(TensorSpec::len).sum();
        let mut model = Self {
            config,
            pinned_output: None,
            params: vec![0.0; n_params],
            layout,
        };
        let gain = (2.0 / (1.0 + LEAKY_SLOPE * LEAKY_SLOPE)).sqrt();
        for b in 0..N_BLOCKS {
            let last = b == N_BLOCKS - 1;
            for (idx, spec) in model.layout
                [b * TENSORS_PER_BLOCK..(b + 1) * TENSORS_PER_BLOCK]
                .iter()
                .enumerate()
            {
                let (offset, rows, cols) = (spec.offset, spec.rows, spec.cols);
                match idx {
                    T_LIN1_W | T_PROJ_W => {
                        let std = gain / (cols as f64).sqrt();
                        for i in 0..rows * cols {
                            model.params[offset + i] = std * sample_std_normal(rng);
                        }
                    }
                    T_LIN2_W => {
                        let std = if last {
                            // Damped start keeps early predictions near the
                            // head bias instead of the raw activations.
                            1e-2 / (cols as f64).sqrt()
                        } else {
                            gain / (cols as f64).sqrt()
                        };
                        for i in 0..rows * cols {
                            model.params[offset + i] = std * sample_std_normal(rng);
                        }
                    }
                    T_NORM_SCALE => {
                        model.params[offset..offset + rows].fill(1.0);
                    }
                    T_LIN2_B if last => {
                        let bias = model.config.head.inverse_mean(output_mean);
                        model.params[offset..offset + rows].fill(bias);
                    }
                    _ => {}
                }
            }
        }
        Ok(model)
    }

    /// Rebuild a model from checkpointed parts.
    pub fn from_parts(
        config: MlpConfig,
        params: Vec<f64>,
        pinned_output: Option<f64>,
    ) -> Result<Self> {
        let layout = build_layout(&config);
        let n_params: usize = layout.iter().map(TensorSpec::len).sum();
        if params.len() != n_params {
            return Err(Error::Checkpoint(format!(
                "parameter vector has {} entries, layout wants {n_params}",
                params.len()
            )));
        }
        Ok(Self { config, pinned_output, params, layout })
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn layout(&self) -> &[TensorSpec] {
        &self.layout
    }

    fn tensor(&self, block: usize, idx: usize) -> &[f64] {
        let spec = &self.layout[block * TENSORS_PER_BLOCK + idx];
        &self.params[spec.offset..spec.offset + spec.len()]
    }

    fn block_dims(&self, b: usize) -> (usize, usize) {
        let in_dim = if b == 0 { self.config.input_dim } else { self.config.hidden };
        let out_dim = if b == N_BLOCKS - 1 { self.config.output_dim } else { self.config.hidden };
        (in_dim, out_dim)
    }

    /// Turn latent counts into input features under the configured scaling.
    pub fn scale_counts(
        &self,
        z: &[u64],
        ts: &[u32],
        batch: usize,
        schedule: &ThinningSchedule,
    ) -> Vec<f64> {
        let d = self.config.input_dim;
        let lambda = schedule.lambda();
        let mut x = vec![0.0; z.len()];
        match self.config.input_scaling {
            InputScaling::ByLambda => {
                for (xi, &zi) in x.iter_mut().zip(z) {
                    *xi = zi as f64 / lambda;
                }
            }
            InputScaling::Unbiased => {
                for b in 0..batch {
                    let denom = lambda * schedule.alpha(ts[b]);
                    for c in 0..d {
                        x[b * d + c] = z[b * d + c] as f64 / denom;
                    }
                }
            }
        }
        x
    }

    /// Forward pass from raw counts and per-example timesteps.
    pub fn forward_counts(
        &self,
        z: &[u64],
        ts: &[u32],
        batch: usize,
        schedule: &ThinningSchedule,
    ) -> Result<(Vec<f64>, Tape)> {
        let e = self.config.time_embed_dim;
        if ts.len() != batch || z.len() != batch * self.config.input_dim {
            return Err(Error::Shape(format!(
                "forward_counts: {} counts and {} timesteps for batch {batch}",
                z.len(),
                ts.len()
            )));
        }
        let x = self.scale_counts(z, ts, batch, schedule);
        let mut emb = vec![0.0; batch * e];
        for (i, &t) in ts.iter().enumerate() {
            if t < 1 || t > schedule.t_steps() {
                return Err(Error::Timestep(format!(
                    "timestep {t} outside 1..={}",
                    schedule.t_steps()
                )));
            }
            embedding::fill_embedding(t, e, &mut emb[i * e..(i + 1) * e]);
        }
        self.forward_features(&x, &emb, batch)
    }

    /// Forward pass from prepared features and embeddings.
    pub fn forward_features(&self, x: &[f64], emb: &[f64], batch: usize) -> Result<(Vec<f64>, Tape)> {
        let (d_in, d_out, h, e) = (
            self.config.input_dim,
            self.config.output_dim,
            self.config.hidden,
            self.config.time_embed_dim,
        );
        if x.len() != batch * d_in || emb.len() != batch * e {
            return Err(Error::Shape(format!(
                "forward: got {} features and {} embedding values for batch {batch}",
                x.len(),
                emb.len()
            )));
        }
        if let Some(c) = self.pinned_output {
            return Ok((
                vec![c; batch * d_out],
                Tape {
                    batch,
                    pinned: true,
                    emb: Vec::new(),
                    blocks: Vec::new(),
                    head_pre: Vec::new(),
                },
            ));
        }

        let mut blocks = Vec::with_capacity(N_BLOCKS);
        let mut cur = x.to_vec();
        let mut tproj = vec![0.0; batch * h];
        for b in 0..N_BLOCKS {
            let (in_dim, out_dim) = self.block_dims(b);
            let mut pre = vec![0.0; batch * h];
            linalg::linear_forward(
                &mut pre,
                &cur,
                self.tensor(b, T_LIN1_W),
                self.tensor(b, T_LIN1_B),
                batch,
                in_dim,
                h,
            );
            linalg::linear_forward(
                &mut tproj,
                emb,
                self.tensor(b, T_PROJ_W),
                self.tensor(b, T_PROJ_B),
                batch,
                e,
                h,
            );
            for (slot, &uv) in pre.iter_mut().zip(&tproj) {
                *slot += uv;
            }

            let gamma = self.tensor(b, T_NORM_SCALE);
            let beta = self.tensor(b, T_NORM_OFFSET);
            let mut norm = vec![0.0; batch * h];
            let mut inv_std = vec![0.0; batch];
            let mut post_ln = vec![0.0; batch * h];
            for r in 0..batch {
                let row = &pre[r * h..(r + 1) * h];
                let mean = row.iter().sum::<f64>() / h as f64;
                let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / h as f64;
                let inv = 1.0 / (var + LN_EPS).sqrt();
                inv_std[r] = inv;
                let nr = &mut norm[r * h..(r + 1) * h];
                let yr = &mut post_ln[r * h..(r + 1) * h];
                for j in 0..h {
                    let n = (row[j] - mean) * inv;
                    nr[j] = n;
                    yr[j] = gamma[j] * n + beta[j];
                }
            }

            let mut act = post_ln.clone();
            for v in act.iter_mut() {
                if *v < 0.0 {
                    *v *= LEAKY_SLOPE;
                }
            }

            let mut out = vec![0.0; batch * out_dim];
            linalg::linear_forward(
                &mut out,
                &act,
                self.tensor(b, T_LIN2_W),
                self.tensor(b, T_LIN2_B),
                batch,
                h,
                out_dim,
            );
            if out.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite activation leaving block {b}"
                )));
            }
            blocks.push(BlockTape { input: cur, norm, inv_std, post_ln, act });
            cur = out;
        }

        let head_pre = cur;
        let mut out = vec![0.0; batch * d_out];
        self.config.head.apply(&head_pre, &mut out);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite activation leaving head".into()));
        }
        Ok((
            out,
            Tape {
                batch,
                pinned: false,
                emb: emb.to_vec(),
                blocks,
                head_pre,
            },
        ))
    }

    /// Precompute the per-block time projections for one timestep, shared by
    /// every chain in a sampling step.
    pub fn time_context(&self, t: u32) -> SharedTimeContext {
        let (h, e) = (self.config.hidden, self.config.time_embed_dim);
        let mut emb = vec![0.0; e];
        embedding::fill_embedding(t, e, &mut emb);
        let mut per_block = Vec::with_capacity(N_BLOCKS);
        for b in 0..N_BLOCKS {
            // Same kernel as the taped forward so both paths round alike.
            let mut u = vec![0.0; h];
            linalg::linear_forward(
                &mut u,
                &emb,
                self.tensor(b, T_PROJ_W),
                self.tensor(b, T_PROJ_B),
                1,
                e,
                h,
            );
            per_block.push(u);
        }
        SharedTimeContext { t, per_block }
    }

    /// Tape-free forward with one timestep for the whole batch; numerically
    /// identical to [`Self::forward_features`] with that timestep repeated.
    pub fn forward_shared(
        &self,
        x: &[f64],
        ctx: &SharedTimeContext,
        batch: usize,
    ) -> Result<Vec<f64>> {
        let (d_in, d_out, h) = (
            self.config.input_dim,
            self.config.output_dim,
            self.config.hidden,
        );
        if x.len() != batch * d_in {
            return Err(Error::Shape(format!(
                "forward_shared: got {} features for batch {batch}",
                x.len()
            )));
        }
        if let Some(c) = self.pinned_output {
            return Ok(vec![c; batch * d_out]);
        }
        let mut cur = x.to_vec();
        for b in 0..N_BLOCKS {
            let (in_dim, out_dim) = self.block_dims(b);
            let mut pre = vec![0.0; batch * h];
            linalg::linear_forward(
                &mut pre,
                &cur,
                self.tensor(b, T_LIN1_W),
                self.tensor(b, T_LIN1_B),
                batch,
                in_dim,
                h,
            );
            let u = &ctx.per_block[b];
            let gamma = self.tensor(b, T_NORM_SCALE);
            let beta = self.tensor(b, T_NORM_OFFSET);
            for r in 0..batch {
                let row = &mut pre[r * h..(r + 1) * h];
                for (slot, &uv) in row.iter_mut().zip(u) {
                    *slot += uv;
                }
                let mean = row.iter().sum::<f64>() / h as f64;
                let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / h as f64;
                let inv = 1.0 / (var + LN_EPS).sqrt();
                for (j, slot) in row.iter_mut().enumerate() {
                    let y = gamma[j] * ((*slot - mean) * inv) + beta[j];
                    *slot = if y < 0.0 { y * LEAKY_SLOPE } else { y };
                }
            }
            let mut out = vec![0.0; batch * out_dim];
            linalg::linear_forward(
                &mut out,
                &pre,
                self.tensor(b, T_LIN2_W),
                self.tensor(b, T_LIN2_B),
                batch,
                h,
                out_dim,
            );
            if out.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite activation leaving block {b}"
                )));
            }
            cur = out;
        }
        let mut out = vec![0.0; batch * d_out];
        self.config.head.apply(&cur, &mut out);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite activation leaving head".into()));
        }
        Ok(out)
    }

    /// Exact reverse-mode gradient of every parameter given the loss gradient
    /// with respect to the head output.
    pub fn backward(&self, tape: &Tape, dloss_dout: &[f64]) -> Result<Vec<f64>> {
        let mut grads = vec![0.0; self.params.len()];
        self.backward_into(tape, dloss_dout, &mut grads)?;
        Ok(grads)
    }

    /// As [`Self::backward`], accumulating into a caller-owned buffer.
    pub fn backward_into(
        &self,
        tape: &Tape,
        dloss_dout: &[f64],
        grads: &mut [f64],
    ) -> Result<()> {
        let (d_out, h, e) = (
            self.config.output_dim,
            self.config.hidden,
            self.config.time_embed_dim,
        );
        let batch = tape.batch;
        if dloss_dout.len() != batch * d_out {
            return Err(Error::Shape("backward: upstream gradient shape mismatch".into()));
        }
        if grads.len() != self.params.len() {
            return Err(Error::Shape("backward: gradient buffer length mismatch".into()));
        }
        if tape.pinned {
            return Ok(());
        }
        if tape.blocks.len() != N_BLOCKS {
            return Err(Error::Shape("backward: tape does not match model".into()));
        }

        // Head.
        let mut dout = vec![0.0; batch * d_out];
        self.config.head.backward(&tape.head_pre, dloss_dout, &mut dout);

        for b in (0..N_BLOCKS).rev() {
            let (in_dim, out_dim) = self.block_dims(b);
            let bt = &tape.blocks[b];
            let input: &[f64] = &bt.input;
            let base = b * TENSORS_PER_BLOCK;

            // Second linear.
            {
                let spec = &self.layout[base + T_LIN2_W];
                linalg::weight_grad_acc(
                    &mut grads[spec.offset..spec.offset + spec.len()],
                    &dout,
                    &bt.act,
                    batch,
                    out_dim,
                    h,
                );
                let spec = &self.layout[base + T_LIN2_B];
                linalg::bias_grad_acc(
                    &mut grads[spec.offset..spec.offset + spec.len()],
                    &dout,
                    batch,
                    out_dim,
                );
            }
            let mut dact = vec![0.0; batch * h];
            linalg::input_grad(&mut dact, &dout, self.tensor(b, T_LIN2_W), batch, out_dim, h);

            // Leaky ReLU.
            for (g, &y) in dact.iter_mut().zip(&bt.post_ln) {
                if y < 0.0 {
                    *g *= LEAKY_SLOPE;
                }
            }

            // Layer norm.
            let gamma = self.tensor(b, T_NORM_SCALE);
            let mut dpre = vec![0.0; batch * h];
            {
                let scale_spec = &self.layout[base + T_NORM_SCALE];
                let offset_spec = &self.layout[base + T_NORM_OFFSET];
                for r in 0..batch {
                    let dy = &dact[r * h..(r + 1) * h];
                    let nr = &bt.norm[r * h..(r + 1) * h];
                    let inv = bt.inv_std[r];
                    let mut m1 = 0.0;
                    let mut m2 = 0.0;
                    for j in 0..h {
                        let dyg = dy[j] * gamma[j];
                        m1 += dyg;
                        m2 += dyg * nr[j];
                        grads[scale_spec.offset + j] += dy[j] * nr[j];
                        grads[offset_spec.offset + j] += dy[j];
                    }
                    m1 /= h as f64;
                    m2 /= h as f64;
                    let dp = &mut dpre[r * h..(r + 1) * h];
                    for j in 0..h {
                        let dyg = dy[j] * gamma[j];
                        dp[j] = inv * (dyg - m1 - nr[j] * m2);
                    }
                }
            }

            // First linear and the time projection share the upstream dpre.
            {
                let spec = &self.layout[base + T_LIN1_W];
                linalg::weight_grad_acc(
                    &mut grads[spec.offset..spec.offset + spec.len()],
                    &dpre,
                    input,
                    batch,
                    h,
                    in_dim,
                );
                let spec = &self.layout[base + T_LIN1_B];
                linalg::bias_grad_acc(&mut grads[spec.offset..spec.offset + spec.len()], &dpre, batch, h);
                let spec = &self.layout[base + T_PROJ_W];
                linalg::weight_grad_acc(
                    &mut grads[spec.offset..spec.offset + spec.len()],
                    &dpre,
                    &tape.emb,
                    batch,
                    h,
                    e,
                );
                let spec = &self.layout[base + T_PROJ_B];
                linalg::bias_grad_acc(&mut grads[spec.offset..spec.offset + spec.len()], &dpre, batch, h);
            }

            if b > 0 {
                let mut dinput = vec![0.0; batch * in_dim];
                linalg::input_grad(&mut dinput, &dpre, self.tensor(b, T_LIN1_W), batch, h, in_dim);
                dout = dinput;
            }
        }
        Ok(())
    }
}

impl OutputHead {
    fn apply(&self, pre: &[f64], out: &mut [f64]) {
        match self {
            OutputHead::Softplus => {
                for (o, &u) in out.iter_mut().zip(pre) {
                    *o = softplus(u);
                }
            }
            OutputHead::SigmoidScaled { scale } => {
                for (o, &u) in out.iter_mut().zip(pre) {
                    *o = scale * sigmoid(u);
                }
            }
            OutputHead::Linear => out.copy_from_slice(pre),
        }
    }

    fn backward(&self, pre: &[f64], upstream: &[f64], dpre: &mut [f64]) {
        match self {
            OutputHead::Softplus => {
                for ((d, &u), &g) in dpre.iter_mut().zip(pre).zip(upstream) {
                    *d = g * sigmoid(u);
                }
            }
            OutputHead::SigmoidScaled { scale } => {
                for ((d, &u), &g) in dpre.iter_mut().zip(pre).zip(upstream) {
                    let s = sigmoid(u);
                    *d = g * scale * s * (1.0 - s);
                }
            }
            OutputHead::Linear => dpre.copy_from_slice(upstream),
        }
    }

    /// Pre-activation that maps to `mean` under this head, used to seed the
    /// final bias.
    fn inverse_mean(&self, mean: f64) -> f64 {
        match self {
            OutputHead::Softplus => {
                let m = mean.max(1e-3);
                if m > 30.0 {
                    m
                } else {
                    (m.exp() - 1.0).ln()
                }
            }
            OutputHead::SigmoidScaled { scale } => {
                let p = (mean / scale).clamp(1e-6, 1.0 - 1e-6);
                (p / (1.0 - p)).ln()
            }
            OutputHead::Linear => 0.0,
        }
    }
}

#[inline]
pub fn softplus(u: f64) -> f64 {
    u.max(0.0) + (-u.abs()).exp().ln_1p()
}

#[inline]
pub fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_model(head: OutputHead, seed: u64) -> MlpModel {
        let cfg = MlpConfig {
            input_dim: 2,
            output_dim: 2,
            hidden: 8,
            time_embed_dim: 8,
            head,
            input_scaling: InputScaling::ByLambda,
        };
        MlpModel::init(cfg, 1.0, &mut RngStream::new(seed, 0)).unwrap()
    }

    fn sched() -> ThinningSchedule {
        ThinningSchedule::beta_linear(16, 0.01, 0.3, 10.0).unwrap()
    }

    #[test]
    fn forward_is_deterministic() {
        let m = tiny_model(OutputHead::Softplus, 1);
        let s = sched();
        let z = vec![3u64, 0, 7, 2];
        let ts = vec![4u32, 9];
        let (a, _) = m.forward_counts(&z, &ts, 2, &s).unwrap();
        let (b, _) = m.forward_counts(&z, &ts, 2, &s).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn softplus_head_is_positive_even_for_extreme_inputs() {
        let m = tiny_model(OutputHead::Softplus, 2);
        let s = sched();
        let huge = vec![1_000_000u64, 1_000_000];
        let (out, _) = m.forward_counts(&huge, &[16], 1, &s).unwrap();
        assert!(out.iter().all(|&v| v > 0.0 && v.is_finite()), "{out:?}");
        let (out, _) = m.forward_counts(&[0, 0], &[1], 1, &s).unwrap();
        assert!(out.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn sigmoid_head_respects_scale() {
        let m = tiny_model(OutputHead::SigmoidScaled { scale: 1.0 }, 3);
        let s = sched();
        let (out, _) = m.forward_counts(&[50, 0], &[8], 1, &s).unwrap();
        assert!(out.iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn fresh_model_starts_near_target_mean() {
        // Damped final weights plus the seeded bias keep the initial output
        // within a factor of a few of the requested mean.
        let cfg = MlpConfig::new(1, OutputHead::Softplus);
        let m = MlpModel::init(cfg, 3.0, &mut RngStream::new(9, 0)).unwrap();
        let s = sched();
        let (out, _) = m.forward_counts(&[0], &[8], 1, &s).unwrap();
        assert!(out[0] > 1.0 && out[0] < 6.0, "initial output {}", out[0]);
    }

    #[test]
    fn pinned_model_short_circuits() {
        let mut m = tiny_model(OutputHead::Softplus, 4);
        m.pinned_output = Some(0.0);
        let s = sched();
        let (out, tape) = m.forward_counts(&[5, 5], &[3], 1, &s).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
        let grads = m.backward(&tape, &[1.0, 1.0]).unwrap();
        assert!(grads.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_parameter_gradients() {
        let m = tiny_model(OutputHead::Softplus, 5);
        let s = sched();
        let (_, tape) = m.forward_counts(&[1, 2, 3, 4], &[2, 7], 2, &s).unwrap();
        let grads = m.backward(&tape, &[0.0; 4]).unwrap();
        assert!(grads.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn unbiased_scaling_divides_by_alpha() {
        let cfg = MlpConfig {
            input_scaling: InputScaling::Unbiased,
            ..MlpConfig::new(1, OutputHead::Softplus)
        };
        let m = MlpModel::init(cfg, 1.0, &mut RngStream::new(10, 0)).unwrap();
        let s = sched();
        let x = m.scale_counts(&[10, 10], &[1, 16], 2, &s);
        assert!((x[0] - 10.0 / (10.0 * s.alpha(1))).abs() < 1e-15);
        assert!((x[1] - 10.0 / (10.0 * s.alpha(16))).abs() < 1e-15);
        let y = MlpModel::init(MlpConfig::new(1, OutputHead::Softplus), 1.0, &mut RngStream::new(10, 0))
            .unwrap()
            .scale_counts(&[10, 10], &[1, 16], 2, &s);
        assert_eq!(y, vec![1.0, 1.0]);
    }

    // Central-difference gradient check over every parameter of a tiny model,
    // covering each distinct layer type.
    fn finite_diff_check(head: OutputHead, seed: u64) -> f64 {
        let mut m = tiny_model(head, seed);
        let s = sched();
        let z = vec![3u64, 1, 0, 9, 4, 2];
        let ts = vec![2u32, 11, 16];
        let batch = 3;

        // A fixed quadratic contraction of the outputs keeps the check loss
        // smooth and head-agnostic.
        let weights: Vec<f64> = (0..batch * 2).map(|i| 0.3 + 0.1 * i as f64).collect();
        let loss_of = |model: &MlpModel| -> f64 {
            let (out, _) = model.forward_counts(&z, &ts, batch, &s).unwrap();
            out.iter().zip(&weights).map(|(o, w)| w * o * o).sum::<f64>()
        };

        let (out, tape) = m.forward_counts(&z, &ts, batch, &s).unwrap();
        let upstream: Vec<f64> = out.iter().zip(&weights).map(|(o, w)| 2.0 * w * o).collect();
        let grads = m.backward(&tape, &upstream).unwrap();

        let mut worst: f64 = 0.0;
        let h = 1e-5;
        let mut rng = RngStream::new(seed + 77, 1);
        for _ in 0..120 {
            let i = rng.next_index(m.n_params() as u64) as usize;
            let orig = m.params()[i];
            m.params_mut()[i] = orig + h;
            let lp = loss_of(&m);
            m.params_mut()[i] = orig - h;
            let lm = loss_of(&m);
            m.params_mut()[i] = orig;
            let fd = (lp - lm) / (2.0 * h);
            let denom = fd.abs().max(grads[i].abs()).max(1e-6);
            worst = worst.max((fd - grads[i]).abs() / denom);
        }
        worst
    }

    #[test]
    fn gradients_match_finite_differences_softplus() {
        let worst = finite_diff_check(OutputHead::Softplus, 21);
        assert!(worst < 1e-4, "worst relative error {worst}");
    }

    #[test]
    fn gradients_match_finite_differences_sigmoid() {
        let worst = finite_diff_check(OutputHead::SigmoidScaled { scale: 1.0 }, 22);
        assert!(worst < 1e-4, "worst relative error {worst}");
    }

    #[test]
    fn gradients_match_finite_differences_linear() {
        let worst = finite_diff_check(OutputHead::Linear, 23);
        assert!(worst < 1e-4, "worst relative error {worst}");
    }

    #[test]
    fn composed_loss_gradient_vanishes_at_exact_prediction() {
        // If the head output equals the data exactly, the divergence gradient
        // is zero, so every parameter gradient must vanish.
        let mut m = tiny_model(OutputHead::Softplus, 30);
        m.pinned_output = None;
        let s = sched();
        let (out, tape) = m.forward_counts(&[2, 5], &[4], 1, &s).unwrap();
        let x0 = crate::process::DataBatch::dense(out.clone(), 1, 2, crate::process::Domain::NonnegReal)
            .unwrap();
        let mut upstream = vec![0.0; 2];
        crate::objective::jump_loss_grad(&x0, &out, &mut upstream).unwrap();
        assert!(upstream.iter().all(|&g| g.abs() < 1e-15));
        let grads = m.backward(&tape, &upstream).unwrap();
        assert!(grads.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn shared_forward_is_bitwise_identical_to_taped_forward() {
        let m = tiny_model(OutputHead::Softplus, 40);
        let s = sched();
        let batch = 5;
        let z: Vec<u64> = (0..batch * 2).map(|i| (i * 3 % 11) as u64).collect();
        let t = 7u32;
        let ts = vec![t; batch];
        let (reference, _) = m.forward_counts(&z, &ts, batch, &s).unwrap();
        let ctx = m.time_context(t);
        let features = m.scale_counts(&z, &ts, batch, &s);
        let shared = m.forward_shared(&features, &ctx, batch).unwrap();
        assert_eq!(reference, shared);
    }

    #[test]
    fn layout_is_stable_and_complete() {
        let m = tiny_model(OutputHead::Softplus, 6);
        let total: usize = m.layout().iter().map(TensorSpec::len).sum();
        assert_eq!(total, m.n_params());
        let names: Vec<&str> = m.layout().iter().map(|s| s.name.as_str()).collect();
        assert!(names.contains(&"block0.linear1.weight"));
        assert!(names.contains(&"block2.linear2.bias"));
        assert_eq!(names.len(), 24);
    }

    #[test]
    fn forward_rejects_bad_timesteps_and_shapes() {
        let m = tiny_model(OutputHead::Softplus, 7);
        let s = sched();
        assert!(m.forward_counts(&[1, 2], &[0], 1, &s).is_err());
        assert!(m.forward_counts(&[1, 2], &[17], 1, &s).is_err());
        assert!(m.forward_counts(&[1], &[3], 1, &s).is_err());
    }
}
