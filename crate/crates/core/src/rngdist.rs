//! Seedable random variate generation and exact pmf evaluation.
//!
//! Every sampler draws from an explicit [`RngStream`] identified by a
//! `(seed, stream_id)` pair, so any draw sequence can be replayed exactly and
//! distinct stream ids give statistically independent streams. All pmf
//! arithmetic runs in log space through `ln_gamma`; naive factorials overflow
//! long before the count ranges seen here do.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const TWO_PI: f64 = std::f64::consts::TAU;

// ---------------------------------------------------------------------------
// RngStream
// ---------------------------------------------------------------------------

/// A seedable, keyed random stream.
///
/// Identical `(seed, stream_id)` pairs replay the identical variate sequence
/// across runs and thread placements; distinct stream ids select independent
/// ChaCha streams under the same key.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self { seed, stream_id, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A fresh stream under the same seed with a different stream id.
    pub fn derive(&self, stream_id: u64) -> Self {
        Self::new(self.seed, stream_id)
    }

    /// Uniform draw in `[0, 1)`.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        self.rng.random()
    }

    /// Uniform draw in `(0, 1]`, safe as a logarithm argument.
    #[inline]
    pub fn next_f64_open(&mut self) -> f64 {
        1.0 - self.rng.random::<f64>()
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.rng.random()
    }

    /// Uniform integer in `[0, n)`.
    #[inline]
    pub fn next_index(&mut self, n: u64) -> u64 {
        self.rng.random_range(0..n)
    }
}

// ---------------------------------------------------------------------------
// Special functions
// ---------------------------------------------------------------------------

const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for positive arguments (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0, "ln_gamma domain: x = {x}");
    if x < 0.5 {
        // Reflection keeps accuracy for small arguments.
        let pi = std::f64::consts::PI;
        return pi.ln() - (pi * x).sin().ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * TWO_PI.ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

const LN_FACT_TABLE_LEN: usize = 257;

fn ln_fact_table() -> &'static [f64; LN_FACT_TABLE_LEN] {
    use std::sync::OnceLock;
    static TABLE: OnceLock<[f64; LN_FACT_TABLE_LEN]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [0.0f64; LN_FACT_TABLE_LEN];
        // Kahan summation keeps the cumulative ln k! accurate to ~1 ulp.
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        for k in 1..LN_FACT_TABLE_LEN {
            let term = (k as f64).ln() - comp;
            let next = sum + term;
            comp = (next - sum) - term;
            sum = next;
            t[k] = sum;
        }
        t
    })
}

/// ln(k!) with a dense table for the small counts the identity tests sweep.
pub fn ln_factorial(k: u64) -> f64 {
    if (k as usize) < LN_FACT_TABLE_LEN {
        ln_fact_table()[k as usize]
    } else {
        ln_gamma(k as f64 + 1.0)
    }
}

fn ln_choose(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n);
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

// ---------------------------------------------------------------------------
// Parameter types
// ---------------------------------------------------------------------------

/// Parameters of a shifted Poisson law: support `{m, m+1, ...}` with
/// `Pr(x = k) = rate^(k-m) e^(-rate) / (k-m)!`. A zero rate collapses to a
/// point mass at the shift.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShiftedPoissonParams {
    pub shift: u64,
    pub rate: f64,
}

impl ShiftedPoissonParams {
    pub fn new(shift: u64, rate: f64) -> Result<Self> {
        check_rate(rate)?;
        Ok(Self { shift, rate })
    }
}

fn check_rate(rate: f64) -> Result<()> {
    if !rate.is_finite() || rate < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "Poisson rate must be finite and non-negative, got {rate}"
        )));
    }
    Ok(())
}

fn check_probability(p: f64) -> Result<()> {
    if !p.is_finite() || !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "probability must lie in [0, 1], got {p}"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Poisson sampling
// ---------------------------------------------------------------------------

/// Threshold between sequential-search inversion and transformed rejection.
const POISSON_INVERSION_CUTOFF: f64 = 10.0;

/// Draw from `Pois(rate)`. Inversion by sequential search below rate 10,
/// PTRS transformed rejection above; `rate = 0` returns 0 deterministically.
pub fn sample_poisson(rate: f64, rng: &mut RngStream) -> Result<u64> {
    check_rate(rate)?;
    if rate == 0.0 {
        return Ok(0);
    }
    if rate < POISSON_INVERSION_CUTOFF {
        Ok(poisson_inversion(rate, rng))
    } else {
        Ok(poisson_ptrs(rate, rng))
    }
}

fn poisson_inversion(rate: f64, rng: &mut RngStream) -> u64 {
    let mut k = 0u64;
    let mut prob = (-rate).exp();
    let mut cum = prob;
    let u = rng.next_f64();
    while u > cum && prob > 0.0 {
        k += 1;
        prob *= rate / k as f64;
        cum += prob;
    }
    k
}

// Hormann (1993), transformed rejection with squeeze; exact accept test via
// ln_gamma. Valid for rate >= 10.
fn poisson_ptrs(rate: f64, rng: &mut RngStream) -> u64 {
    let log_rate = rate.ln();
    let b = 0.931 + 2.53 * rate.sqrt();
    let a = -0.059 + 0.024_83 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let v_r = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = rng.next_f64() - 0.5;
        let v = rng.next_f64();
        let us = 0.5 - u.abs();
        let kf = ((2.0 * a / us + b) * u + rate + 0.43).floor();
        if us >= 0.07 && v <= v_r && kf >= 0.0 {
            return kf as u64;
        }
        if kf < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        if v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln()
            <= kf * log_rate - rate - ln_gamma(kf + 1.0)
        {
            return kf as u64;
        }
    }
}

// ---------------------------------------------------------------------------
// Binomial sampling
// ---------------------------------------------------------------------------

const BINOMIAL_INVERSION_CUTOFF: f64 = 10.0;

/// Draw from `Binomial(n, p)`. Inversion below `n * min(p, 1-p) = 10`, BTRS
/// transformed rejection above; degenerate `p` in `{0, 1}` is deterministic.
pub fn sample_binomial(n: u64, p: f64, rng: &mut RngStream) -> Result<u64> {
    check_probability(p)?;
    if n == 0 || p == 0.0 {
        return Ok(0);
    }
    if p == 1.0 {
        return Ok(n);
    }
    let q = p.min(1.0 - p);
    let flipped = p > 0.5;
    let k = if (n as f64) * q < BINOMIAL_INVERSION_CUTOFF {
        binomial_inversion(n, q, rng)
    } else {
        binomial_btrs(n, q, rng)
    };
    Ok(if flipped { n - k } else { k })
}

fn binomial_inversion(n: u64, q: f64, rng: &mut RngStream) -> u64 {
    let s = q / (1.0 - q);
    let a = (n + 1) as f64 * s;
    let mut prob = (n as f64 * (1.0 - q).ln()).exp();
    let mut u = rng.next_f64();
    let mut k = 0u64;
    while u > prob {
        u -= prob;
        k += 1;
        if k > n {
            // Floating-point tail leak; the mass beyond n is rounding error.
            return n;
        }
        prob *= a / k as f64 - s;
    }
    k
}

// Hormann's transformed rejection for the binomial, with the exact ln_gamma
// acceptance test. Requires q <= 0.5 and n * q >= 10.
fn binomial_btrs(n: u64, q: f64, rng: &mut RngStream) -> u64 {
    let nf = n as f64;
    let spq = (nf * q * (1.0 - q)).sqrt();
    let b = 1.15 + 2.53 * spq;
    let a = -0.0873 + 0.0248 * b + 0.01 * q;
    let c = nf * q + 0.5;
    let v_r = 0.92 - 4.2 / b;
    let alpha = (2.83 + 5.1 / b) * spq;
    let lpq = (q / (1.0 - q)).ln();
    let m = ((nf + 1.0) * q).floor();
    let h = ln_gamma(m + 1.0) + ln_gamma(nf - m + 1.0);
    loop {
        let u = rng.next_f64() - 0.5;
        let v = rng.next_f64();
        let us = 0.5 - u.abs();
        let kf = ((2.0 * a / us + b) * u + c).floor();
        if kf < 0.0 || kf > nf {
            continue;
        }
        if us >= 0.07 && v <= v_r {
            return kf as u64;
        }
        let accept_bound = h - ln_gamma(kf + 1.0) - ln_gamma(nf - kf + 1.0) + (kf - m) * lpq;
        if (v * alpha / (a / (us * us) + b)).ln() <= accept_bound {
            return kf as u64;
        }
    }
}

// ---------------------------------------------------------------------------
// Shifted Poisson and negative binomial sampling
// ---------------------------------------------------------------------------

/// Draw `shift + Pois(rate)`.
pub fn sample_shifted_poisson(params: ShiftedPoissonParams, rng: &mut RngStream) -> Result<u64> {
    Ok(params.shift + sample_poisson(params.rate, rng)?)
}

/// Draw from `Nbinom(r, p)` with pmf `C(k+r-1, k) p^r (1-p)^k` (mean
/// `r (1-p) / p`), via the gamma-Poisson mixture.
pub fn sample_negative_binomial(r: f64, p: f64, rng: &mut RngStream) -> Result<u64> {
    if !r.is_finite() || r <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "negative binomial r must be positive, got {r}"
        )));
    }
    check_probability(p)?;
    if p == 0.0 {
        return Err(Error::InvalidParameter(
            "negative binomial p = 0 has no finite draw".into(),
        ));
    }
    if p == 1.0 {
        return Ok(0);
    }
    let rate = sample_gamma(r, p / (1.0 - p), rng)?;
    sample_poisson(rate, rng)
}

// ---------------------------------------------------------------------------
// Continuous samplers
// ---------------------------------------------------------------------------

/// Standard normal draw (Box-Muller).
pub fn sample_std_normal(rng: &mut RngStream) -> f64 {
    let u1 = rng.next_f64_open();
    let u2 = rng.next_f64();
    (-2.0 * u1.ln()).sqrt() * (TWO_PI * u2).cos()
}

/// Draw from `Gamma(shape, rate)` by Marsaglia-Tsang, with the standard
/// `U^(1/shape)` boost below shape 1.
pub fn sample_gamma(shape: f64, rate: f64, rng: &mut RngStream) -> Result<f64> {
    if !shape.is_finite() || shape <= 0.0 || !rate.is_finite() || rate <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "gamma shape and rate must be positive, got shape={shape} rate={rate}"
        )));
    }
    if shape < 1.0 {
        let boost = rng.next_f64_open().powf(1.0 / shape);
        return Ok(marsaglia_tsang(shape + 1.0, rng) * boost / rate);
    }
    Ok(marsaglia_tsang(shape, rng) / rate)
}

fn marsaglia_tsang(shape: f64, rng: &mut RngStream) -> f64 {
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let mut x = sample_std_normal(rng);
        let mut v = 1.0 + c * x;
        while v <= 0.0 {
            x = sample_std_normal(rng);
            v = 1.0 + c * x;
        }
        v = v * v * v;
        let u = rng.next_f64_open();
        if u < 1.0 - 0.0331 * x * x * x * x {
            return d * v;
        }
        if u.ln() < 0.5 * x * x + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// Draw from `Beta(a, b)` via two gammas.
pub fn sample_beta(a: f64, b: f64, rng: &mut RngStream) -> Result<f64> {
    let x = sample_gamma(a, 1.0, rng)?;
    let y = sample_gamma(b, 1.0, rng)?;
    Ok(x / (x + y))
}

/// The auxiliary continuous laws used by the synthetic data generators.
#[derive(Clone, Debug)]
pub enum AuxDistribution {
    Gamma { shape: f64, rate: f64 },
    Beta { a: f64, b: f64 },
    Uniform { lo: f64, hi: f64 },
    HalfCauchy,
    /// Half Student-t with two degrees of freedom.
    HalfT2,
    Mixture(Vec<(f64, AuxDistribution)>),
}

/// Draw a non-negative real from one of the auxiliary laws.
pub fn sample_auxiliary(dist: &AuxDistribution, rng: &mut RngStream) -> Result<f64> {
    match dist {
        AuxDistribution::Gamma { shape, rate } => sample_gamma(*shape, *rate, rng),
        AuxDistribution::Beta { a, b } => sample_beta(*a, *b, rng),
        AuxDistribution::Uniform { lo, hi } => {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidParameter(format!(
                    "uniform bounds must satisfy lo < hi, got [{lo}, {hi}]"
                )));
            }
            Ok(lo + (hi - lo) * rng.next_f64())
        }
        AuxDistribution::HalfCauchy => {
            // Quantile of |Cauchy|: tan(pi/2 * u).
            Ok((std::f64::consts::FRAC_PI_2 * rng.next_f64()).tan().abs())
        }
        AuxDistribution::HalfT2 => {
            // |Z / sqrt(V/2)| with V ~ chi-square(2), so V/2 = -ln U.
            loop {
                let denom = -rng.next_f64_open().ln();
                if denom > 0.0 {
                    return Ok((sample_std_normal(rng) / denom.sqrt()).abs());
                }
            }
        }
        AuxDistribution::Mixture(parts) => {
            let total: f64 = parts.iter().map(|(w, _)| *w).sum();
            if parts.is_empty() || (total - 1.0).abs() > 1e-9 || parts.iter().any(|(w, _)| *w < 0.0)
            {
                return Err(Error::InvalidParameter(format!(
                    "mixture weights must be non-negative and sum to 1, sum = {total}"
                )));
            }
            let u = rng.next_f64();
            let mut cum = 0.0;
            for (w, part) in parts {
                cum += w;
                if u < cum {
                    return sample_auxiliary(part, rng);
                }
            }
            sample_auxiliary(&parts.last().expect("non-empty").1, rng)
        }
    }
}

// ---------------------------------------------------------------------------
// pmf / log-pmf
// ---------------------------------------------------------------------------

/// Out-of-support log mass sentinel.
pub const LOG_ZERO: f64 = f64::NEG_INFINITY;

pub fn poisson_logpmf(k: u64, rate: f64) -> Result<f64> {
    check_rate(rate)?;
    if rate == 0.0 {
        return Ok(if k == 0 { 0.0 } else { LOG_ZERO });
    }
    Ok(k as f64 * rate.ln() - rate - ln_factorial(k))
}

pub fn poisson_pmf(k: u64, rate: f64) -> Result<f64> {
    Ok(poisson_logpmf(k, rate)?.exp())
}

pub fn binomial_logpmf(k: u64, n: u64, p: f64) -> Result<f64> {
    check_probability(p)?;
    if k > n {
        return Ok(LOG_ZERO);
    }
    if p == 0.0 {
        return Ok(if k == 0 { 0.0 } else { LOG_ZERO });
    }
    if p == 1.0 {
        return Ok(if k == n { 0.0 } else { LOG_ZERO });
    }
    Ok(ln_choose(n, k) + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln())
}

pub fn binomial_pmf(k: u64, n: u64, p: f64) -> Result<f64> {
    Ok(binomial_logpmf(k, n, p)?.exp())
}

pub fn shifted_poisson_logpmf(k: u64, params: ShiftedPoissonParams) -> Result<f64> {
    check_rate(params.rate)?;
    if k < params.shift {
        return Ok(LOG_ZERO);
    }
    poisson_logpmf(k - params.shift, params.rate)
}

pub fn shifted_poisson_pmf(k: u64, params: ShiftedPoissonParams) -> Result<f64> {
    Ok(shifted_poisson_logpmf(k, params)?.exp())
}

/// `Nbinom(r, p)` log mass under the success-probability convention:
/// `C(k+r-1, k) p^r (1-p)^k`.
pub fn negative_binomial_logpmf(k: u64, r: f64, p: f64) -> Result<f64> {
    if !r.is_finite() || r <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "negative binomial r must be positive, got {r}"
        )));
    }
    check_probability(p)?;
    if p == 0.0 {
        return Ok(LOG_ZERO);
    }
    if p == 1.0 {
        return Ok(if k == 0 { 0.0 } else { LOG_ZERO });
    }
    Ok(ln_gamma(k as f64 + r) - ln_factorial(k) - ln_gamma(r)
        + r * p.ln()
        + k as f64 * (1.0 - p).ln())
}

pub fn negative_binomial_pmf(k: u64, r: f64, p: f64) -> Result<f64> {
    Ok(negative_binomial_logpmf(k, r, p)?.exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(id: u64) -> RngStream {
        RngStream::new(0x5eed_cafe, id)
    }

    fn mean_var(draws: &[f64]) -> (f64, f64) {
        let n = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / n;
        let var = draws.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    #[test]
    fn identical_streams_replay_identically() {
        let mut a = RngStream::new(7, 42);
        let mut b = RngStream::new(7, 42);
        for _ in 0..1000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn distinct_streams_differ() {
        let mut a = RngStream::new(7, 1);
        let mut b = RngStream::new(7, 2);
        let same = (0..64).filter(|_| a.next_u64() == b.next_u64()).count();
        assert_eq!(same, 0);
    }

    #[test]
    fn poisson_zero_rate_is_zero() {
        let mut rng = stream(0);
        for _ in 0..100 {
            assert_eq!(sample_poisson(0.0, &mut rng).unwrap(), 0);
        }
    }

    #[test]
    fn poisson_rejects_bad_rate() {
        let mut rng = stream(0);
        assert!(sample_poisson(-1.0, &mut rng).is_err());
        assert!(sample_poisson(f64::NAN, &mut rng).is_err());
        assert!(sample_poisson(f64::INFINITY, &mut rng).is_err());
    }

    #[test]
    fn poisson_moments_rate_4() {
        let mut rng = stream(1);
        let n = 1_000_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| sample_poisson(4.0, &mut rng).unwrap() as f64)
            .collect();
        let (mean, var) = mean_var(&draws);
        assert!((mean - 4.0).abs() < 0.01, "mean {mean}");
        assert!((var - 4.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn poisson_mass_at_zero_rate_1() {
        let mut rng = stream(2);
        let n = 1_000_000;
        let zeros = (0..n)
            .filter(|_| sample_poisson(1.0, &mut rng).unwrap() == 0)
            .count();
        let freq = zeros as f64 / n as f64;
        assert!((freq - (-1.0f64).exp()).abs() < 0.002, "freq {freq}");
    }

    #[test]
    fn poisson_large_rate_moments() {
        // Exercises the PTRS branch.
        let mut rng = stream(3);
        let n = 200_000;
        let rate = 4000.0;
        let draws: Vec<f64> = (0..n)
            .map(|_| sample_poisson(rate, &mut rng).unwrap() as f64)
            .collect();
        let (mean, var) = mean_var(&draws);
        assert!((mean - rate).abs() < 0.6, "mean {mean}");
        assert!((var / rate - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn binomial_degenerate_cases() {
        let mut rng = stream(4);
        assert_eq!(sample_binomial(10, 0.0, &mut rng).unwrap(), 0);
        assert_eq!(sample_binomial(10, 1.0, &mut rng).unwrap(), 10);
        assert_eq!(sample_binomial(0, 0.4, &mut rng).unwrap(), 0);
        assert!(sample_binomial(10, 1.5, &mut rng).is_err());
        assert!(sample_binomial(10, -0.1, &mut rng).is_err());
    }

    #[test]
    fn binomial_mean_small_np() {
        let mut rng = stream(5);
        let n = 1_000_000;
        let sum: u64 = (0..n)
            .map(|_| sample_binomial(10, 0.3, &mut rng).unwrap())
            .sum();
        let mean = sum as f64 / n as f64;
        assert!((mean - 3.0).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn binomial_btrs_moments() {
        let mut rng = stream(6);
        let n_draws = 400_000;
        let (n, p) = (50_000u64, 0.37);
        let draws: Vec<f64> = (0..n_draws)
            .map(|_| sample_binomial(n, p, &mut rng).unwrap() as f64)
            .collect();
        let (mean, var) = mean_var(&draws);
        let (tm, tv) = (n as f64 * p, n as f64 * p * (1.0 - p));
        assert!((mean / tm - 1.0).abs() < 1e-3, "mean {mean} vs {tm}");
        assert!((var / tv - 1.0).abs() < 0.02, "var {var} vs {tv}");
        assert!(draws.iter().all(|&k| k <= n as f64));
    }

    #[test]
    fn shifted_poisson_point_mass_and_pmf() {
        let mut rng = stream(7);
        let p = ShiftedPoissonParams::new(5, 0.0).unwrap();
        for _ in 0..50 {
            assert_eq!(sample_shifted_poisson(p, &mut rng).unwrap(), 5);
        }
        let p = ShiftedPoissonParams::new(2, 1.5).unwrap();
        let expected = 1.5 * (-1.5f64).exp();
        assert!((shifted_poisson_pmf(3, p).unwrap() - expected).abs() < 1e-12);
        assert_eq!(shifted_poisson_pmf(1, p).unwrap(), 0.0);
    }

    #[test]
    fn shifted_poisson_empirical_pmf() {
        let mut rng = stream(8);
        let p = ShiftedPoissonParams::new(2, 1.5).unwrap();
        let n = 1_000_000;
        let hits = (0..n)
            .filter(|_| sample_shifted_poisson(p, &mut rng).unwrap() == 3)
            .count();
        let freq = hits as f64 / n as f64;
        let expected = 1.5 * (-1.5f64).exp();
        assert!((freq - expected).abs() < 0.002, "freq {freq}");
    }

    #[test]
    fn shifted_minus_shift_matches_plain_poisson() {
        // Two-sample chi-square between shifted draws minus the shift and
        // plain Poisson draws.
        let mut a = stream(9);
        let mut b = stream(10);
        let params = ShiftedPoissonParams::new(11, 3.0).unwrap();
        let n = 100_000;
        let xs: Vec<u64> = (0..n)
            .map(|_| sample_shifted_poisson(params, &mut a).unwrap() - 11)
            .collect();
        let ys: Vec<u64> = (0..n).map(|_| sample_poisson(3.0, &mut b).unwrap()).collect();
        let p = crate::evaluation::chi_square_two_sample(&xs, &ys);
        assert!(p > 0.01, "p = {p}");
    }

    #[test]
    fn poisson_superposition() {
        // Sum of independent Poissons is Poisson with the summed rate.
        let mut rng = stream(11);
        let rates = [0.7, 1.9, 2.4];
        let n = 100_000;
        let sums: Vec<u64> = (0..n)
            .map(|_| {
                rates
                    .iter()
                    .map(|&r| sample_poisson(r, &mut rng).unwrap())
                    .sum()
            })
            .collect();
        let total: f64 = rates.iter().sum();
        let p = crate::evaluation::chi_square_gof(&sums, |k| poisson_pmf(k, total).unwrap());
        assert!(p > 0.01, "p = {p}");
    }

    #[test]
    fn pmf_values_match_analytic() {
        assert!((poisson_pmf(0, 1.0).unwrap() - (-1.0f64).exp()).abs() < 1e-12);
        assert!((binomial_pmf(1, 2, 0.5).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(poisson_pmf(3, 0.0).unwrap(), 0.0);
        assert_eq!(poisson_pmf(0, 0.0).unwrap(), 1.0);
        assert_eq!(binomial_logpmf(3, 2, 0.5).unwrap(), LOG_ZERO);
    }

    #[test]
    fn pmf_sums_to_one_over_truncated_support() {
        // Cumulative mass >= 1 - 1e-12 must reach 1 within 1e-10.
        let cases: Vec<Box<dyn Fn(u64) -> f64>> = vec![
            Box::new(|k| poisson_pmf(k, 7.3).unwrap()),
            Box::new(|k| poisson_pmf(k, 123.4).unwrap()),
            Box::new(|k| binomial_pmf(k, 60, 0.37).unwrap()),
            Box::new(|k| {
                shifted_poisson_pmf(k, ShiftedPoissonParams::new(4, 2.2).unwrap()).unwrap()
            }),
            Box::new(|k| negative_binomial_pmf(k, 10.0, 0.1).unwrap()),
            Box::new(|k| negative_binomial_pmf(k, 1.0, 0.9).unwrap()),
        ];
        for pmf in cases {
            let mut sum = 0.0;
            let mut k = 0u64;
            while sum < 1.0 - 1e-12 && k < 5_000_000 {
                sum += pmf(k);
                k += 1;
            }
            assert!(sum >= 1.0 - 1e-12, "support scan ended early, sum = {sum}");
            assert!(sum <= 1.0 + 1e-10, "sum overshoots 1: {sum}");
        }
    }

    #[test]
    fn negative_binomial_mean_matches_convention() {
        let mut rng = stream(12);
        let n = 200_000;
        let sum: u64 = (0..n)
            .map(|_| sample_negative_binomial(10.0, 0.1, &mut rng).unwrap())
            .sum();
        let mean = sum as f64 / n as f64;
        // r (1-p) / p = 90 under the success-probability convention.
        assert!((mean - 90.0).abs() < 1.0, "mean {mean}");
    }

    #[test]
    fn uniform_mean() {
        let mut rng = stream(13);
        let dist = AuxDistribution::Uniform { lo: 0.0, hi: 1.0 };
        let n = 1_000_000;
        let mean = (0..n)
            .map(|_| sample_auxiliary(&dist, &mut rng).unwrap())
            .sum::<f64>()
            / n as f64;
        assert!((mean - 0.5).abs() < 0.002, "mean {mean}");
    }

    #[test]
    fn gamma_mean_shape_half() {
        let mut rng = stream(14);
        let dist = AuxDistribution::Gamma { shape: 0.5, rate: 0.05 };
        let n = 1_000_000;
        let mean = (0..n)
            .map(|_| sample_auxiliary(&dist, &mut rng).unwrap())
            .sum::<f64>()
            / n as f64;
        assert!((mean - 10.0).abs() < 0.3, "mean {mean}");
    }

    #[test]
    fn half_cauchy_median_is_one() {
        let mut rng = stream(15);
        let n = 1_000_000;
        let mut draws: Vec<f64> = (0..n)
            .map(|_| sample_auxiliary(&AuxDistribution::HalfCauchy, &mut rng).unwrap())
            .collect();
        draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = draws[n / 2];
        assert!((median - 1.0).abs() < 0.01, "median {median}");
    }

    #[test]
    fn half_t2_median_matches_analytic() {
        // Median of |t_2| solves F(x) = 3/4 for the t_2 CDF, x = sqrt(2)/... the
        // closed form is x / sqrt(2 + x^2) = 1/2, so x = sqrt(2/3).
        let mut rng = stream(16);
        let n = 1_000_000;
        let mut draws: Vec<f64> = (0..n)
            .map(|_| sample_auxiliary(&AuxDistribution::HalfT2, &mut rng).unwrap())
            .collect();
        draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = draws[n / 2];
        let expected = (2.0f64 / 3.0).sqrt();
        assert!((median - expected).abs() < 0.01, "median {median} vs {expected}");
    }

    #[test]
    fn beta_moments() {
        let mut rng = stream(17);
        let n = 400_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| sample_beta(2.0, 2.0, &mut rng).unwrap())
            .collect();
        let (mean, var) = mean_var(&draws);
        assert!((mean - 0.5).abs() < 0.002, "mean {mean}");
        assert!((var - 0.05).abs() < 0.002, "var {var}");
    }

    #[test]
    fn mixture_validates_weights() {
        let mut rng = stream(18);
        let bad = AuxDistribution::Mixture(vec![
            (0.5, AuxDistribution::HalfCauchy),
            (0.2, AuxDistribution::HalfT2),
        ]);
        assert!(sample_auxiliary(&bad, &mut rng).is_err());
    }

    #[test]
    fn ln_gamma_against_exact_factorials() {
        let mut fact = 1.0f64;
        for k in 1..=15u32 {
            fact *= k as f64;
            let err = (ln_gamma(k as f64 + 1.0) - fact.ln()).abs();
            assert!(err < 1e-12, "k = {k}, err = {err}");
        }
        // Half-integer reference: Gamma(1/2) = sqrt(pi).
        let err = (ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs();
        assert!(err < 1e-12, "err = {err}");
    }
}
