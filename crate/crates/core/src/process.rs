//! Forward thinning and reverse thickening of latent counts.
//!
//! Poisson variant: data are randomized into counts `z_0 ~ Pois(lambda x_0)`,
//! thinned by `Binomial(z_{t-1}, alpha_t / alpha_{t-1})` steps towards the
//! absorbing state zero, and reversed by shifted-Poisson jumps whose rate is
//! `lambda (alpha_{t-1} - alpha_t) x_0` with `x_0` replaced by a model
//! prediction during generation.
//!
//! Binomial variant (count data, no randomization): `z_0 = x_0`, the same
//! thinning chain, a shifted-binomial exact posterior, and a shifted-Poisson
//! approximate reverse step.

use crate::error::{Error, Result};
use crate::rngdist::{self, RngStream};
use crate::schedule::ThinningSchedule;

/// Value domains a batch of observations can live in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Count,
    NonnegReal,
    UnitInterval,
    Binary,
    OneHot,
    Simplex,
    SparseCounts,
    SparseNonneg,
}

impl Domain {
    pub fn is_sparse(self) -> bool {
        matches!(self, Domain::SparseCounts | Domain::SparseNonneg)
    }

    pub fn is_count_valued(self) -> bool {
        matches!(self, Domain::Count | Domain::SparseCounts)
    }
}

#[derive(Clone, Debug)]
enum BatchStorage {
    Dense(Vec<f64>),
    /// Compressed sparse rows; zeros are absorbing under thinning, so forward
    /// passes only ever touch the stored entries.
    Csr {
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    },
}

/// A batch of non-negative observations `x_0`, row-major `rows x cols`.
#[derive(Clone, Debug)]
pub struct DataBatch {
    rows: usize,
    cols: usize,
    domain: Domain,
    storage: BatchStorage,
}

impl DataBatch {
    pub fn dense(values: Vec<f64>, rows: usize, cols: usize, domain: Domain) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::Shape(format!(
                "expected {rows}x{cols} = {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        let batch = Self {
            rows,
            cols,
            domain,
            storage: BatchStorage::Dense(values),
        };
        batch.validate()?;
        Ok(batch)
    }

    /// Single-column batch, the layout of the univariate experiments.
    pub fn univariate(values: Vec<f64>, domain: Domain) -> Result<Self> {
        let rows = values.len();
        Self::dense(values, rows, 1, domain)
    }

    pub fn csr(
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
        rows: usize,
        cols: usize,
        domain: Domain,
    ) -> Result<Self> {
        if indptr.len() != rows + 1 || *indptr.last().unwrap_or(&0) != values.len() {
            return Err(Error::Shape("malformed CSR index pointers".into()));
        }
        if indices.len() != values.len() {
            return Err(Error::Shape("CSR indices/values length mismatch".into()));
        }
        if indices.iter().any(|&c| c >= cols) {
            return Err(Error::Shape("CSR column index out of range".into()));
        }
        let batch = Self {
            rows,
            cols,
            domain,
            storage: BatchStorage::Csr { indptr, indices, values },
        };
        batch.validate()?;
        Ok(batch)
    }

    fn validate(&self) -> Result<()> {
        let check_value = |v: f64| -> Result<()> {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Domain(format!(
                    "batch entries must be finite and non-negative, got {v}"
                )));
            }
            match self.domain {
                Domain::UnitInterval if v > 1.0 => Err(Error::Domain(format!(
                    "unit-interval entry {v} exceeds 1"
                ))),
                Domain::Binary if v != 0.0 && v != 1.0 => {
                    Err(Error::Domain(format!("binary entry {v} not in {{0, 1}}")))
                }
                Domain::Count | Domain::SparseCounts if v.fract() != 0.0 => Err(Error::Domain(
                    format!("count entry {v} is not an integer"),
                )),
                _ => Ok(()),
            }
        };
        match &self.storage {
            BatchStorage::Dense(values) => {
                for &v in values {
                    check_value(v)?;
                }
                if self.domain == Domain::Simplex {
                    for r in 0..self.rows {
                        let sum: f64 = values[r * self.cols..(r + 1) * self.cols].iter().sum();
                        if (sum - 1.0).abs() > 1e-9 {
                            return Err(Error::Domain(format!(
                                "simplex row {r} sums to {sum}"
                            )));
                        }
                    }
                }
            }
            BatchStorage::Csr { values, .. } => {
                for &v in values {
                    check_value(v)?;
                }
            }
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, BatchStorage::Csr { .. })
    }

    pub fn nnz(&self) -> usize {
        match &self.storage {
            BatchStorage::Dense(v) => v.iter().filter(|&&x| x != 0.0).count(),
            BatchStorage::Csr { values, .. } => values.len(),
        }
    }

    /// Dense view; errors on sparse storage.
    pub fn dense_values(&self) -> Result<&[f64]> {
        match &self.storage {
            BatchStorage::Dense(v) => Ok(v),
            BatchStorage::Csr { .. } => Err(Error::Shape(
                "operation requires dense storage; densify the batch first".into(),
            )),
        }
    }

    /// Copy row `r` into `buf` (length `cols`), zero-filling unset entries.
    pub fn row_dense_into(&self, r: usize, buf: &mut [f64]) {
        assert_eq!(buf.len(), self.cols);
        match &self.storage {
            BatchStorage::Dense(v) => buf.copy_from_slice(&v[r * self.cols..(r + 1) * self.cols]),
            BatchStorage::Csr { indptr, indices, values } => {
                buf.fill(0.0);
                for i in indptr[r]..indptr[r + 1] {
                    buf[indices[i]] = values[i];
                }
            }
        }
    }

    pub fn to_dense_vec(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.rows * self.cols];
        for r in 0..self.rows {
            self.row_dense_into(r, &mut out[r * self.cols..(r + 1) * self.cols]);
        }
        out
    }

    /// Visit the stored non-zero entries of a row as `(col, value)`.
    pub fn for_each_in_row(&self, r: usize, mut f: impl FnMut(usize, f64)) {
        match &self.storage {
            BatchStorage::Dense(v) => {
                for (c, &x) in v[r * self.cols..(r + 1) * self.cols].iter().enumerate() {
                    if x != 0.0 {
                        f(c, x);
                    }
                }
            }
            BatchStorage::Csr { indptr, indices, values } => {
                for i in indptr[r]..indptr[r + 1] {
                    f(indices[i], values[i]);
                }
            }
        }
    }

    /// Mean over all `rows x cols` coordinates (zeros included).
    pub fn mean(&self) -> f64 {
        let total: f64 = match &self.storage {
            BatchStorage::Dense(v) => v.iter().sum(),
            BatchStorage::Csr { values, .. } => values.iter().sum(),
        };
        total / (self.rows * self.cols) as f64
    }
}

/// A batch of latent counts `z_t` with its timestep.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountState {
    rows: usize,
    cols: usize,
    counts: Vec<u64>,
    t: u32,
}

impl CountState {
    pub fn new(counts: Vec<u64>, rows: usize, cols: usize, t: u32) -> Result<Self> {
        if counts.len() != rows * cols {
            return Err(Error::Shape(format!(
                "expected {rows}x{cols} = {} counts, got {}",
                rows * cols,
                counts.len()
            )));
        }
        Ok(Self { rows, cols, counts, t })
    }

    pub fn zeros(rows: usize, cols: usize, t: u32) -> Self {
        Self {
            rows,
            cols,
            counts: vec![0; rows * cols],
            t,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn counts_f64(&self) -> Vec<f64> {
        self.counts.iter().map(|&z| z as f64).collect()
    }
}

fn check_same_shape(z: &CountState, x0: &DataBatch) -> Result<()> {
    if z.rows != x0.rows() || z.cols != x0.cols() {
        return Err(Error::Shape(format!(
            "count state is {}x{}, data batch is {}x{}",
            z.rows,
            z.cols,
            x0.rows(),
            x0.cols()
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Poisson-variant forward process
// ---------------------------------------------------------------------------

/// Encode observations as latent counts: `z_0 ~ Pois(lambda x_0)` elementwise.
/// Zeros in `x_0` stay zero with probability one.
pub fn randomize(x0: &DataBatch, schedule: &ThinningSchedule, rng: &mut RngStream) -> Result<CountState> {
    thin_to(x0, schedule, 0, rng)
}

/// One forward thinning step: `z_t ~ Binomial(z_{t-1}, alpha_t / alpha_{t-1})`.
pub fn thin_step(z: &CountState, schedule: &ThinningSchedule, t: u32, rng: &mut RngStream) -> Result<CountState> {
    if t != z.t + 1 || t > schedule.t_steps() {
        return Err(Error::Timestep(format!(
            "thin_step to t = {t} from state at t = {} (T = {})",
            z.t,
            schedule.t_steps()
        )));
    }
    let retention = schedule.retention(t);
    let mut counts = vec![0u64; z.counts.len()];
    for (out, &c) in counts.iter_mut().zip(&z.counts) {
        if c > 0 {
            *out = rngdist::sample_binomial(c, retention, rng)?;
        }
    }
    CountState::new(counts, z.rows, z.cols, t)
}

/// Single-shot draw of the forward marginal: `z_t ~ Pois(lambda alpha_t x_0)`.
/// Distributionally identical to `randomize` followed by `t` thinning steps.
pub fn thin_to(x0: &DataBatch, schedule: &ThinningSchedule, t: u32, rng: &mut RngStream) -> Result<CountState> {
    if t > schedule.t_steps() {
        return Err(Error::Timestep(format!(
            "t = {t} exceeds schedule length {}",
            schedule.t_steps()
        )));
    }
    let rate_scale = schedule.lambda() * schedule.alpha(t);
    let mut counts = vec![0u64; x0.rows() * x0.cols()];
    for r in 0..x0.rows() {
        let base = r * x0.cols();
        let mut err = None;
        x0.for_each_in_row(r, |c, v| {
            if err.is_none() {
                match rngdist::sample_poisson(rate_scale * v, rng) {
                    Ok(z) => counts[base + c] = z,
                    Err(e) => err = Some(e),
                }
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
    }
    CountState::new(counts, x0.rows(), x0.cols(), t)
}

/// Exact conditional posterior draw for the Poisson variant:
/// `z_{t-1} = z_t + Pois(lambda (alpha_{t-1} - alpha_t) x_0)` elementwise.
pub fn posterior_sample(
    z_t: &CountState,
    x0: &DataBatch,
    schedule: &ThinningSchedule,
    rng: &mut RngStream,
) -> Result<CountState> {
    check_same_shape(z_t, x0)?;
    if z_t.t < 1 {
        return Err(Error::Timestep("posterior_sample needs t >= 1".into()));
    }
    let rate_scale = schedule.lambda() * schedule.gap(z_t.t);
    let mut counts = z_t.counts.clone();
    for r in 0..x0.rows() {
        let base = r * x0.cols();
        let mut err = None;
        x0.for_each_in_row(r, |c, v| {
            if err.is_none() {
                match rngdist::sample_poisson(rate_scale * v, rng) {
                    Ok(j) => counts[base + c] += j,
                    Err(e) => err = Some(e),
                }
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
    }
    CountState::new(counts, z_t.rows, z_t.cols, z_t.t - 1)
}

/// Reverse (thickening) step with a prediction in place of `x_0`. The
/// prediction is dense because zero coordinates can jump.
pub fn reverse_step(
    z_t: &CountState,
    x0_hat: &[f64],
    schedule: &ThinningSchedule,
    rng: &mut RngStream,
) -> Result<CountState> {
    if x0_hat.len() != z_t.counts.len() {
        return Err(Error::Shape(format!(
            "prediction has {} entries, state has {}",
            x0_hat.len(),
            z_t.counts.len()
        )));
    }
    if z_t.t < 1 {
        return Err(Error::Timestep("reverse_step needs t >= 1".into()));
    }
    if let Some(bad) = x0_hat.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::Domain(format!(
            "reverse_step predictions must be non-negative and finite, got {bad}"
        )));
    }
    let rate_scale = schedule.lambda() * schedule.gap(z_t.t);
    let mut counts = z_t.counts.clone();
    for (out, &f) in counts.iter_mut().zip(x0_hat) {
        if f > 0.0 {
            *out += rngdist::sample_poisson(rate_scale * f, rng)?;
        }
    }
    CountState::new(counts, z_t.rows, z_t.cols, z_t.t - 1)
}

// ---------------------------------------------------------------------------
// Binomial variant (count data, z_0 = x_0)
// ---------------------------------------------------------------------------

fn require_count_domain(x0: &DataBatch) -> Result<()> {
    if !x0.domain().is_count_valued() {
        return Err(Error::Domain(format!(
            "binomial variant requires count-valued data, got {:?}",
            x0.domain()
        )));
    }
    Ok(())
}

/// Forward step of the binomial variant; identical mechanics to [`thin_step`]
/// but starting from raw counts `z_0 = x_0` with no Poisson randomization.
pub fn binjump_thin_step(
    z: &CountState,
    schedule: &ThinningSchedule,
    t: u32,
    rng: &mut RngStream,
) -> Result<CountState> {
    thin_step(z, schedule, t, rng)
}

/// Single-shot binomial-variant marginal: `z_t ~ Binomial(x_0, alpha_t)`.
pub fn binjump_thin_to(
    x0: &DataBatch,
    schedule: &ThinningSchedule,
    t: u32,
    rng: &mut RngStream,
) -> Result<CountState> {
    require_count_domain(x0)?;
    if t > schedule.t_steps() {
        return Err(Error::Timestep(format!(
            "t = {t} exceeds schedule length {}",
            schedule.t_steps()
        )));
    }
    let alpha_t = schedule.alpha(t);
    let mut counts = vec![0u64; x0.rows() * x0.cols()];
    for r in 0..x0.rows() {
        let base = r * x0.cols();
        let mut err = None;
        x0.for_each_in_row(r, |c, v| {
            if err.is_none() {
                match rngdist::sample_binomial(v as u64, alpha_t, rng) {
                    Ok(z) => counts[base + c] = z,
                    Err(e) => err = Some(e),
                }
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
    }
    CountState::new(counts, x0.rows(), x0.cols(), t)
}

/// `p_t = (alpha_{t-1} - alpha_t) / (1 - alpha_t)`, the shifted-binomial
/// success probability of the binomial-variant posterior.
pub fn binjump_p(schedule: &ThinningSchedule, t: u32) -> f64 {
    schedule.gap(t) / (1.0 - schedule.alpha(t))
}

/// Exact binomial-variant posterior draw:
/// `z_{t-1} = z_t + Binomial(x_0 - z_t, p_t)`, so the result lies in
/// `[z_t, x_0]` coordinatewise.
pub fn binjump_posterior_sample(
    z_t: &CountState,
    x0: &DataBatch,
    schedule: &ThinningSchedule,
    rng: &mut RngStream,
) -> Result<CountState> {
    require_count_domain(x0)?;
    check_same_shape(z_t, x0)?;
    if z_t.t < 1 {
        return Err(Error::Timestep("binjump_posterior_sample needs t >= 1".into()));
    }
    let p_t = binjump_p(schedule, z_t.t);
    let x0_dense = x0.to_dense_vec();
    let mut counts = z_t.counts.clone();
    for (i, (out, &x)) in counts.iter_mut().zip(&x0_dense).enumerate() {
        let x = x as u64;
        if *out > x {
            return Err(Error::Domain(format!(
                "z_t exceeds x_0 at flat index {i}: {} > {x}",
                *out
            )));
        }
        *out += rngdist::sample_binomial(x - *out, p_t, rng)?;
    }
    CountState::new(counts, z_t.rows, z_t.cols, z_t.t - 1)
}

/// Approximate binomial-variant reverse step with a real-valued prediction:
/// `z_{t-1} = z_t + Pois(p_t max(x0_hat - z_t, 0))`.
pub fn binjump_reverse_step(
    z_t: &CountState,
    x0_hat: &[f64],
    schedule: &ThinningSchedule,
    rng: &mut RngStream,
) -> Result<CountState> {
    if x0_hat.len() != z_t.counts.len() {
        return Err(Error::Shape(format!(
            "prediction has {} entries, state has {}",
            x0_hat.len(),
            z_t.counts.len()
        )));
    }
    if z_t.t < 1 {
        return Err(Error::Timestep("binjump_reverse_step needs t >= 1".into()));
    }
    let p_t = binjump_p(schedule, z_t.t);
    let mut counts = z_t.counts.clone();
    for (out, &f) in counts.iter_mut().zip(x0_hat) {
        let residual = (f - *out as f64).max(0.0);
        if residual > 0.0 {
            *out += rngdist::sample_poisson(p_t * residual, rng)?;
        }
    }
    CountState::new(counts, z_t.rows, z_t.cols, z_t.t - 1)
}

// ---------------------------------------------------------------------------
// Domain constraint map
// ---------------------------------------------------------------------------

/// Map raw decoded values into the target domain.
pub fn constrain_g(y: &[f64], rows: usize, cols: usize, domain: Domain) -> Result<DataBatch> {
    if y.len() != rows * cols {
        return Err(Error::Shape(format!(
            "expected {rows}x{cols} values, got {}",
            y.len()
        )));
    }
    if let Some(bad) = y.iter().find(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("constraint input not finite: {bad}")));
    }
    let values: Vec<f64> = match domain {
        Domain::Count | Domain::SparseCounts => y.iter().map(|v| v.round().max(0.0)).collect(),
        Domain::NonnegReal | Domain::SparseNonneg => y.iter().map(|v| v.max(0.0)).collect(),
        Domain::Binary => y.iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }).collect(),
        Domain::UnitInterval => y.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        Domain::OneHot => {
            let mut out = vec![0.0; y.len()];
            for r in 0..rows {
                let row = &y[r * cols..(r + 1) * cols];
                let mut best = 0usize;
                for (c, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = c;
                    }
                }
                out[r * cols + best] = 1.0;
            }
            out
        }
        Domain::Simplex => {
            let mut out = vec![0.0; y.len()];
            for r in 0..rows {
                let row = &y[r * cols..(r + 1) * cols];
                let sum: f64 = row.iter().map(|v| v.max(0.0)).sum();
                let target = &mut out[r * cols..(r + 1) * cols];
                if sum == 0.0 {
                    target.fill(1.0 / cols as f64);
                } else {
                    for (o, &v) in target.iter_mut().zip(row) {
                        *o = v.max(0.0) / sum;
                    }
                }
            }
            out
        }
    };
    DataBatch::dense(values, rows, cols, domain)
}
