//! Wasserstein-1 evaluation, document summary statistics, and multi-run
//! report aggregation, plus the chi-square helpers the statistical tests use.

use crate::error::{Error, Result};
use crate::process::DataBatch;
use crate::rngdist::ln_gamma;

// ---------------------------------------------------------------------------
// Wasserstein-1
// ---------------------------------------------------------------------------

/// W1 between two equal-size samples: mean absolute difference of the sorted
/// values.
pub fn wasserstein1_equal(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!(
            "equal-size W1 needs matching lengths, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.is_empty() {
        return Err(Error::Shape("W1 of empty samples".into()));
    }
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    ys.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let sum: f64 = xs.iter().zip(&ys).map(|(a, b)| (a - b).abs()).sum();
    Ok(sum / xs.len() as f64)
}

/// Exact W1 between two empirical distributions of possibly different sizes:
/// the integral of |F - G| over the merged support. Coincides with
/// [`wasserstein1_equal`] at equal sizes.
pub fn wasserstein1_empirical(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::Shape("W1 of empty samples".into()));
    }
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    ys.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let (nx, ny) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut dist = 0.0;
    let mut prev = xs[0].min(ys[0]);
    while i < xs.len() || j < ys.len() {
        let next = match (xs.get(i), ys.get(j)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => break,
        };
        let (fx, fy) = (i as f64 / nx, j as f64 / ny);
        dist += (fx - fy).abs() * (next - prev);
        prev = next;
        while i < xs.len() && xs[i] == next {
            i += 1;
        }
        while j < ys.len() && ys[j] == next {
            j += 1;
        }
    }
    Ok(dist)
}

/// A reference law for distances against the truth rather than a sample.
pub enum TrueLaw<'a> {
    /// Analytic law on the non-negative integers, given by its pmf. The
    /// support is truncated once the cumulative mass reaches `1 - 1e-10`.
    DiscretePmf(&'a dyn Fn(u64) -> f64),
    /// A large frozen reference sample standing in for the law.
    Reference(&'a [f64]),
}

/// W1 between an empirical sample and a true law.
///
/// Discrete analytic laws are integrated exactly via summed CDF differences
/// over the merged integer support; reference samples fall back to the exact
/// two-sample computation.
pub fn wasserstein1_vs_true(samples: &[f64], law: &TrueLaw) -> Result<f64> {
    match law {
        TrueLaw::Reference(reference) => wasserstein1_empirical(samples, reference),
        TrueLaw::DiscretePmf(pmf) => {
            if samples.is_empty() {
                return Err(Error::Shape("W1 of empty samples".into()));
            }
            let n = samples.len() as f64;
            let mut max_k = 0u64;
            let mut counts = std::collections::HashMap::<u64, u64>::new();
            for &s in samples {
                if !s.is_finite() || s < 0.0 || s.fract() != 0.0 {
                    return Err(Error::Domain(format!(
                        "discrete-law W1 needs non-negative integer samples, got {s}"
                    )));
                }
                let k = s as u64;
                *counts.entry(k).or_insert(0) += 1;
                max_k = max_k.max(k);
            }
            let mut dist = 0.0;
            let mut cdf_true = 0.0;
            let mut cdf_emp = 0.0;
            let mut k = 0u64;
            // March the merged support: stop once both the empirical sample is
            // exhausted and the true tail mass is below 1e-10.
            loop {
                cdf_true += pmf(k);
                if let Some(&c) = counts.get(&k) {
                    cdf_emp += c as f64 / n;
                }
                dist += (cdf_true.min(1.0) - cdf_emp).abs();
                if k >= max_k && cdf_true >= 1.0 - 1e-10 {
                    break;
                }
                k += 1;
                if k > 100_000_000 {
                    return Err(Error::Numeric(
                        "discrete-law support scan exceeded 1e8 states".into(),
                    ));
                }
            }
            Ok(dist)
        }
    }
}

// ---------------------------------------------------------------------------
// Document summary statistics
// ---------------------------------------------------------------------------

/// Which per-row magnitude statistic to report alongside sparsity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DocStatMode {
    /// Raw counts: the magnitude is the document length (sum of counts).
    Bow,
    /// Weighted vectors: the magnitude is the l1 norm.
    Tfidf,
}

/// Per-row summary statistics of a documents batch.
#[derive(Clone, Debug)]
pub struct DocStats {
    /// Fraction of zero coordinates per row.
    pub sparsity: Vec<f64>,
    /// Document length (bow) or l1 norm (tfidf) per row.
    pub magnitude: Vec<f64>,
}

pub fn summary_stats(data: &DataBatch, _mode: DocStatMode) -> DocStats {
    let cols = data.cols() as f64;
    let mut sparsity = Vec::with_capacity(data.rows());
    let mut magnitude = Vec::with_capacity(data.rows());
    for r in 0..data.rows() {
        let mut nnz = 0usize;
        let mut total = 0.0;
        data.for_each_in_row(r, |_, v| {
            if v != 0.0 {
                nnz += 1;
                total += v;
            }
        });
        sparsity.push(1.0 - nnz as f64 / cols);
        magnitude.push(total);
    }
    DocStats { sparsity, magnitude }
}

// ---------------------------------------------------------------------------
// Multi-run aggregation
// ---------------------------------------------------------------------------

/// Aggregated metric over independent runs.
#[derive(Clone, Debug, serde::Serialize)]
pub struct EvalReport {
    pub metric: String,
    pub per_run: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (R - 1 denominator); absent for a single run.
    pub std: Option<f64>,
    pub fingerprint: String,
}

/// Mean and sample standard deviation over per-run values.
pub fn aggregate(metric: &str, runs: &[f64], fingerprint: &str) -> Result<EvalReport> {
    if runs.is_empty() {
        return Err(Error::Shape("aggregate needs at least one run".into()));
    }
    let n = runs.len() as f64;
    let mean = runs.iter().sum::<f64>() / n;
    let std = if runs.len() >= 2 {
        let ss: f64 = runs.iter().map(|v| (v - mean) * (v - mean)).sum();
        Some((ss / (n - 1.0)).sqrt())
    } else {
        None
    };
    Ok(EvalReport {
        metric: metric.to_string(),
        per_run: runs.to_vec(),
        mean,
        std,
        fingerprint: fingerprint.to_string(),
    })
}

// ---------------------------------------------------------------------------
// Chi-square machinery
// ---------------------------------------------------------------------------

/// Regularized lower incomplete gamma P(a, x) by series / continued fraction.
fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        // Series expansion.
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut n = a;
        for _ in 0..500 {
            n += 1.0;
            term *= x / n;
            sum += term;
            if term.abs() < sum.abs() * 1e-15 {
                break;
            }
        }
        sum * (-x + a * x.ln() - ln_gamma(a)).exp()
    } else {
        1.0 - gamma_q_cf(a, x)
    }
}

/// Regularized upper incomplete gamma Q(a, x) via Lentz continued fraction.
fn gamma_q_cf(a: f64, x: f64) -> f64 {
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-15 {
            break;
        }
    }
    h * (-x + a * x.ln() - ln_gamma(a)).exp()
}

/// Survival function of the chi-square distribution with `dof` degrees of
/// freedom, used as the p-value of the goodness-of-fit statistics below.
pub fn chi_square_sf(stat: f64, dof: f64) -> f64 {
    if stat <= 0.0 {
        return 1.0;
    }
    (1.0 - gamma_p(dof / 2.0, stat / 2.0)).clamp(0.0, 1.0)
}

const MIN_EXPECTED_PER_BIN: f64 = 5.0;

/// Chi-square goodness of fit of integer draws against an analytic pmf.
/// Adjacent integer bins are merged until every expected count reaches 5,
/// with one final bin absorbing the upper tail.
pub fn chi_square_gof(draws: &[u64], pmf: impl Fn(u64) -> f64) -> f64 {
    let n = draws.len() as f64;
    let max_k = draws.iter().copied().max().unwrap_or(0);
    let mut observed = vec![0f64; max_k as usize + 2];
    for &d in draws {
        observed[d as usize] += 1.0;
    }
    // Expected counts per integer, with everything beyond max_k pooled.
    let mut expected = vec![0f64; max_k as usize + 2];
    let mut cum = 0.0;
    for k in 0..=max_k {
        let p = pmf(k);
        expected[k as usize] = n * p;
        cum += p;
    }
    expected[max_k as usize + 1] = n * (1.0 - cum).max(0.0);

    let mut stat = 0.0;
    let mut bins = 0usize;
    let (mut obs_acc, mut exp_acc) = (0.0, 0.0);
    for i in 0..expected.len() {
        obs_acc += observed[i];
        exp_acc += expected[i];
        let tail: f64 = expected[i + 1..].iter().sum();
        if exp_acc >= MIN_EXPECTED_PER_BIN && tail >= MIN_EXPECTED_PER_BIN {
            stat += (obs_acc - exp_acc) * (obs_acc - exp_acc) / exp_acc;
            bins += 1;
            obs_acc = 0.0;
            exp_acc = 0.0;
        }
    }
    if exp_acc > 0.0 {
        stat += (obs_acc - exp_acc) * (obs_acc - exp_acc) / exp_acc;
        bins += 1;
    }
    if bins < 2 {
        return 1.0;
    }
    chi_square_sf(stat, (bins - 1) as f64)
}

/// Two-sample chi-square homogeneity test on integer draws.
pub fn chi_square_two_sample(xs: &[u64], ys: &[u64]) -> f64 {
    let max_k = xs.iter().chain(ys).copied().max().unwrap_or(0) as usize;
    let mut ox = vec![0f64; max_k + 1];
    let mut oy = vec![0f64; max_k + 1];
    for &x in xs {
        ox[x as usize] += 1.0;
    }
    for &y in ys {
        oy[y as usize] += 1.0;
    }
    let (nx, ny) = (xs.len() as f64, ys.len() as f64);
    // Merge neighbouring bins until both pooled expectations are workable.
    let mut stat = 0.0;
    let mut bins = 0usize;
    let (mut ax, mut ay) = (0.0, 0.0);
    let mut remaining: f64 = ox.iter().sum::<f64>() + oy.iter().sum::<f64>();
    for i in 0..=max_k {
        ax += ox[i];
        ay += oy[i];
        remaining -= ox[i] + oy[i];
        let pooled = (ax + ay) * nx / (nx + ny);
        let pooled_y = (ax + ay) * ny / (nx + ny);
        if pooled >= MIN_EXPECTED_PER_BIN && pooled_y >= MIN_EXPECTED_PER_BIN && remaining >= MIN_EXPECTED_PER_BIN
        {
            stat += (ax - pooled) * (ax - pooled) / pooled
                + (ay - pooled_y) * (ay - pooled_y) / pooled_y;
            bins += 1;
            ax = 0.0;
            ay = 0.0;
        }
    }
    if ax + ay > 0.0 {
        let pooled = (ax + ay) * nx / (nx + ny);
        let pooled_y = (ax + ay) * ny / (nx + ny);
        if pooled > 0.0 && pooled_y > 0.0 {
            stat += (ax - pooled) * (ax - pooled) / pooled
                + (ay - pooled_y) * (ay - pooled_y) / pooled_y;
            bins += 1;
        }
    }
    if bins < 2 {
        return 1.0;
    }
    chi_square_sf(stat, (bins - 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::Domain;
    use crate::rngdist::{poisson_pmf, sample_poisson, RngStream};
    use proptest::prelude::*;

    #[test]
    fn w1_identity_and_hand_values() {
        assert_eq!(
            wasserstein1_equal(&[0.0, 1.0, 2.0], &[0.0, 1.0, 2.0]).unwrap(),
            0.0
        );
        let v = wasserstein1_equal(&[0.0, 0.0, 3.0], &[1.0, 1.0, 1.0]).unwrap();
        assert!((v - 4.0 / 3.0).abs() < 1e-15);
        assert!(wasserstein1_equal(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn w1_translation() {
        let x: Vec<f64> = (0..100).map(|i| (i as f64).sin() + 2.0).collect();
        let y: Vec<f64> = x.iter().map(|v| v + 0.75).collect();
        let v = wasserstein1_equal(&x, &y).unwrap();
        assert!((v - 0.75).abs() < 1e-12);
    }

    #[test]
    fn w1_empirical_matches_equal_at_same_size() {
        let x: Vec<f64> = (0..500).map(|i| ((i * 37) % 97) as f64 / 9.0).collect();
        let y: Vec<f64> = (0..500).map(|i| ((i * 53) % 89) as f64 / 7.0).collect();
        let a = wasserstein1_equal(&x, &y).unwrap();
        let b = wasserstein1_empirical(&x, &y).unwrap();
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }

    #[test]
    fn w1_vs_true_point_mass_against_poisson() {
        // W1 between a point mass at 0 and Pois(1) is the Poisson mean, 1.
        let samples = vec![0.0; 1000];
        let law = TrueLaw::DiscretePmf(&|k| poisson_pmf(k, 1.0).unwrap());
        let v = wasserstein1_vs_true(&samples, &law).unwrap();
        assert!((v - 1.0).abs() < 1e-9, "v = {v}");
    }

    #[test]
    fn w1_vs_true_self_distance_floor() {
        let mut rng = RngStream::new(17, 5);
        let samples: Vec<f64> = (0..100_000)
            .map(|_| sample_poisson(1.0, &mut rng).unwrap() as f64)
            .collect();
        let law = TrueLaw::DiscretePmf(&|k| poisson_pmf(k, 1.0).unwrap());
        let v = wasserstein1_vs_true(&samples, &law).unwrap();
        assert!(v < 0.02, "self distance {v}");
    }

    #[test]
    fn w1_vs_reference_equals_equal_size_formula() {
        let x: Vec<f64> = (0..256).map(|i| (i as f64 * 0.37).fract() * 5.0).collect();
        let y: Vec<f64> = (0..256).map(|i| (i as f64 * 0.61).fract() * 5.0).collect();
        let direct = wasserstein1_equal(&x, &y).unwrap();
        let via_law = wasserstein1_vs_true(&x, &TrueLaw::Reference(&y)).unwrap();
        assert!((direct - via_law).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn w1_metric_axioms(
            a in proptest::collection::vec(-50.0f64..50.0, 20),
            b in proptest::collection::vec(-50.0f64..50.0, 20),
            c in proptest::collection::vec(-50.0f64..50.0, 20),
        ) {
            let dab = wasserstein1_equal(&a, &b).unwrap();
            let dba = wasserstein1_equal(&b, &a).unwrap();
            let dac = wasserstein1_equal(&a, &c).unwrap();
            let dcb = wasserstein1_equal(&c, &b).unwrap();
            prop_assert!(dab >= 0.0);
            prop_assert!((dab - dba).abs() < 1e-12);
            prop_assert!(dab <= dac + dcb + 1e-12);
            // Identity holds up to permutation.
            let mut pa = a.clone();
            pa.reverse();
            prop_assert!(wasserstein1_equal(&a, &pa).unwrap() < 1e-12);
        }

        #[test]
        fn w1_scale_equivariance(
            a in proptest::collection::vec(0.0f64..10.0, 16),
            b in proptest::collection::vec(0.0f64..10.0, 16),
            s in 0.1f64..10.0,
        ) {
            let base = wasserstein1_equal(&a, &b).unwrap();
            let sa: Vec<f64> = a.iter().map(|v| v * s).collect();
            let sb: Vec<f64> = b.iter().map(|v| v * s).collect();
            let scaled = wasserstein1_equal(&sa, &sb).unwrap();
            prop_assert!((scaled - s * base).abs() < 1e-9 * (1.0 + scaled.abs()));
        }
    }

    #[test]
    fn summary_stats_values() {
        let d = DataBatch::dense(
            vec![0.0, 0.0, 0.0, 0.0, 2.0, 0.0, 1.0, 0.0],
            2,
            4,
            Domain::SparseCounts,
        )
        .unwrap();
        let stats = summary_stats(&d, DocStatMode::Bow);
        assert_eq!(stats.sparsity, vec![1.0, 0.5]);
        assert_eq!(stats.magnitude, vec![0.0, 3.0]);

        let t = DataBatch::dense(vec![0.3, 0.0, 0.7], 1, 3, Domain::SparseNonneg).unwrap();
        let stats = summary_stats(&t, DocStatMode::Tfidf);
        assert!((stats.sparsity[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((stats.magnitude[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn aggregate_mean_std() {
        let r = aggregate("w1", &[1.0, 1.0, 1.0, 1.0, 1.0], "fp").unwrap();
        assert_eq!(r.mean, 1.0);
        assert_eq!(r.std, Some(0.0));
        let r = aggregate("w1", &[0.0, 2.0], "fp").unwrap();
        assert_eq!(r.mean, 1.0);
        assert!((r.std.unwrap() - 2.0f64.sqrt()).abs() < 1e-15);
        let r = aggregate("w1", &[3.5], "fp").unwrap();
        assert_eq!(r.std, None);
        assert!(aggregate("w1", &[], "fp").is_err());
    }

    #[test]
    fn chi_square_accepts_matching_law() {
        let mut rng = RngStream::new(4, 9);
        let draws: Vec<u64> = (0..100_000)
            .map(|_| sample_poisson(3.0, &mut rng).unwrap())
            .collect();
        let p = chi_square_gof(&draws, |k| poisson_pmf(k, 3.0).unwrap());
        assert!(p > 0.01, "p = {p}");
    }

    #[test]
    fn chi_square_rejects_wrong_law() {
        let mut rng = RngStream::new(4, 10);
        let draws: Vec<u64> = (0..100_000)
            .map(|_| sample_poisson(3.3, &mut rng).unwrap())
            .collect();
        let p = chi_square_gof(&draws, |k| poisson_pmf(k, 3.0).unwrap());
        assert!(p < 1e-6, "p = {p}");
    }

    #[test]
    fn chi_square_sf_reference_values() {
        // Known quantiles: P(chi2_1 > 3.841) ~ 0.05, P(chi2_10 > 18.307) ~ 0.05.
        assert!((chi_square_sf(3.841, 1.0) - 0.05).abs() < 1e-3);
        assert!((chi_square_sf(18.307, 10.0) - 0.05).abs() < 1e-3);
        assert!((chi_square_sf(0.0, 5.0) - 1.0).abs() < 1e-12);
    }
}
