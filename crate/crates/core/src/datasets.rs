//! Dataset generators and loaders: the nine univariate synthetic laws, a
//! sparse triplet-file loader, and a miniature text-to-bag-of-words ingester.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::process::{DataBatch, Domain};
use crate::rngdist::{
    self, ln_gamma, AuxDistribution, RngStream,
};
use crate::streams;

// ---------------------------------------------------------------------------
// Synthetic univariate laws
// ---------------------------------------------------------------------------

/// The univariate benchmark distributions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticName {
    /// `0.9 Pois(1) + 0.1 Pois(100)`.
    PoisMix,
    /// `0.75 Nbinom(1, 0.9) + 0.25 Nbinom(10, 0.1)`.
    NbinomMix,
    /// Beta-negative-binomial: `p ~ Beta(1.5, 1.5)`, `k ~ Nbinom(1, p)`.
    Bnb,
    /// `Gamma(0.5, 0.05)`.
    Gamma,
    HalfCauchy,
    /// Half Student-t with 2 degrees of freedom.
    HalfT,
    /// `Uniform(0, 1)`.
    Uniform,
    /// `Beta(0.5, 0.5)`.
    BetaHalf,
    /// `Beta(2, 2)`.
    BetaTwo,
}

impl SyntheticName {
    pub fn domain(self) -> Domain {
        match self {
            SyntheticName::PoisMix | SyntheticName::NbinomMix | SyntheticName::Bnb => Domain::Count,
            SyntheticName::Gamma | SyntheticName::HalfCauchy | SyntheticName::HalfT => {
                Domain::NonnegReal
            }
            SyntheticName::Uniform | SyntheticName::BetaHalf | SyntheticName::BetaTwo => {
                Domain::UnitInterval
            }
        }
    }

    /// Analytic pmf when the law is discrete.
    pub fn count_law(self) -> Option<CountLaw> {
        match self {
            SyntheticName::PoisMix => Some(CountLaw::PoisMix),
            SyntheticName::NbinomMix => Some(CountLaw::NbinomMix),
            SyntheticName::Bnb => Some(CountLaw::Bnb),
            _ => None,
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "poismix" => Ok(SyntheticName::PoisMix),
            "nbinommix" => Ok(SyntheticName::NbinomMix),
            "bnb" => Ok(SyntheticName::Bnb),
            "gamma" => Ok(SyntheticName::Gamma),
            "half_cauchy" => Ok(SyntheticName::HalfCauchy),
            "half_t" => Ok(SyntheticName::HalfT),
            "uniform" => Ok(SyntheticName::Uniform),
            "beta_half" => Ok(SyntheticName::BetaHalf),
            "beta_two" => Ok(SyntheticName::BetaTwo),
            other => Err(Error::InvalidParameter(format!(
                "unknown synthetic dataset '{other}'"
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SyntheticName::PoisMix => "poismix",
            SyntheticName::NbinomMix => "nbinommix",
            SyntheticName::Bnb => "bnb",
            SyntheticName::Gamma => "gamma",
            SyntheticName::HalfCauchy => "half_cauchy",
            SyntheticName::HalfT => "half_t",
            SyntheticName::Uniform => "uniform",
            SyntheticName::BetaHalf => "beta_half",
            SyntheticName::BetaTwo => "beta_two",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SyntheticSpec {
    pub name: SyntheticName,
    pub n_samples: usize,
    pub seed: u64,
}

fn draw_one(name: SyntheticName, rng: &mut RngStream) -> Result<f64> {
    Ok(match name {
        SyntheticName::PoisMix => {
            let rate = if rng.next_f64() < 0.9 { 1.0 } else { 100.0 };
            rngdist::sample_poisson(rate, rng)? as f64
        }
        SyntheticName::NbinomMix => {
            if rng.next_f64() < 0.75 {
                rngdist::sample_negative_binomial(1.0, 0.9, rng)? as f64
            } else {
                rngdist::sample_negative_binomial(10.0, 0.1, rng)? as f64
            }
        }
        SyntheticName::Bnb => {
            let p = rngdist::sample_beta(1.5, 1.5, rng)?;
            // Guard the measure-zero endpoints that the hierarchy can hit in
            // floating point.
            let p = p.clamp(1e-12, 1.0);
            rngdist::sample_negative_binomial(1.0, p, rng)? as f64
        }
        SyntheticName::Gamma => rngdist::sample_gamma(0.5, 0.05, rng)?,
        SyntheticName::HalfCauchy => {
            rngdist::sample_auxiliary(&AuxDistribution::HalfCauchy, rng)?
        }
        SyntheticName::HalfT => rngdist::sample_auxiliary(&AuxDistribution::HalfT2, rng)?,
        SyntheticName::Uniform => rng.next_f64(),
        SyntheticName::BetaHalf => rngdist::sample_beta(0.5, 0.5, rng)?,
        SyntheticName::BetaTwo => rngdist::sample_beta(2.0, 2.0, rng)?,
    })
}

/// Draw `spec.n_samples` values with one substream per sample, so generation
/// order does not matter and the dataset is a pure function of the spec.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<DataBatch> {
    let mut values = Vec::with_capacity(spec.n_samples);
    for i in 0..spec.n_samples {
        let mut rng = RngStream::new(
            spec.seed,
            streams::stream_id(streams::Space::DataGen, i as u64),
        );
        values.push(draw_one(spec.name, &mut rng)?);
    }
    DataBatch::univariate(values, spec.name.domain())
}

// ---------------------------------------------------------------------------
// Analytic count laws for the distance-to-truth evaluations
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug)]
pub enum CountLaw {
    PoisMix,
    NbinomMix,
    Bnb,
}

impl CountLaw {
    pub fn pmf(&self, k: u64) -> f64 {
        match self {
            CountLaw::PoisMix => {
                0.9 * rngdist::poisson_pmf(k, 1.0).unwrap()
                    + 0.1 * rngdist::poisson_pmf(k, 100.0).unwrap()
            }
            CountLaw::NbinomMix => {
                0.75 * rngdist::negative_binomial_pmf(k, 1.0, 0.9).unwrap()
                    + 0.25 * rngdist::negative_binomial_pmf(k, 10.0, 0.1).unwrap()
            }
            CountLaw::Bnb => {
                // Closed form of the Beta(1.5, 1.5) mixture of Nbinom(1, p):
                // B(a + 1, b + k) / B(a, b) with a = b = 1.5.
                let (a, b) = (1.5, 1.5);
                let ln_beta =
                    |x: f64, y: f64| ln_gamma(x) + ln_gamma(y) - ln_gamma(x + y);
                (ln_beta(a + 1.0, b + k as f64) - ln_beta(a, b)).exp()
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Sparse datasets
// ---------------------------------------------------------------------------

/// A sparse non-negative matrix with an optional token vocabulary.
#[derive(Clone, Debug)]
pub struct SparseDataset {
    batch: DataBatch,
    pub vocabulary: Option<Vec<String>>,
}

impl SparseDataset {
    pub fn new(batch: DataBatch, vocabulary: Option<Vec<String>>) -> Result<Self> {
        if !batch.domain().is_sparse() {
            return Err(Error::Domain(format!(
                "sparse dataset requires a sparse domain, got {:?}",
                batch.domain()
            )));
        }
        if let Some(vocab) = &vocabulary {
            if vocab.len() != batch.cols() {
                return Err(Error::Shape(format!(
                    "vocabulary has {} tokens for {} columns",
                    vocab.len(),
                    batch.cols()
                )));
            }
        }
        Ok(Self { batch, vocabulary })
    }

    pub fn batch(&self) -> &DataBatch {
        &self.batch
    }

    pub fn rows(&self) -> usize {
        self.batch.rows()
    }

    pub fn dim(&self) -> usize {
        self.batch.cols()
    }
}

/// Read the documented triplet text format: a `rows cols nnz` header line and
/// then one `row col value` entry per line, all 0-indexed. Lines starting
/// with `#` are metadata comments.
pub fn load_sparse(path: &Path) -> Result<SparseDataset> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut header: Option<(usize, usize, usize)> = None;
    let mut entries: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut all_integer = true;
    for (line_no, line) in reader.lines().enumerate() {
        let line_no = line_no + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        let parse_err = |msg: &str| Error::Parse {
            line: line_no,
            msg: msg.to_string(),
        };
        if header.is_none() {
            if fields.len() != 3 {
                return Err(parse_err("header must be 'rows cols nnz'"));
            }
            let rows = fields[0].parse().map_err(|_| parse_err("bad row count"))?;
            let cols = fields[1].parse().map_err(|_| parse_err("bad col count"))?;
            let nnz = fields[2].parse().map_err(|_| parse_err("bad nnz count"))?;
            header = Some((rows, cols, nnz));
            continue;
        }
        let (rows, cols, _) = header.unwrap();
        if fields.len() != 3 {
            return Err(parse_err("entry must be 'row col value'"));
        }
        let r: usize = fields[0].parse().map_err(|_| parse_err("bad row index"))?;
        let c: usize = fields[1].parse().map_err(|_| parse_err("bad col index"))?;
        let v: f64 = fields[2].parse().map_err(|_| parse_err("bad value"))?;
        if r >= rows || c >= cols {
            return Err(parse_err(&format!(
                "index ({r}, {c}) outside {rows}x{cols}"
            )));
        }
        if !(v.is_finite() && v > 0.0) {
            return Err(parse_err("stored values must be strictly positive"));
        }
        if entries.insert((r, c), v).is_some() {
            return Err(parse_err(&format!("duplicate entry ({r}, {c})")));
        }
        if v.fract() != 0.0 {
            all_integer = false;
        }
    }
    let (rows, cols, nnz) =
        header.ok_or_else(|| Error::Parse { line: 0, msg: "missing header".into() })?;
    if entries.len() != nnz {
        return Err(Error::Parse {
            line: 0,
            msg: format!("header promises {nnz} entries, file has {}", entries.len()),
        });
    }
    let domain = if all_integer { Domain::SparseCounts } else { Domain::SparseNonneg };
    let mut indptr = vec![0usize; rows + 1];
    let mut indices = Vec::with_capacity(entries.len());
    let mut values = Vec::with_capacity(entries.len());
    for (&(r, c), &v) in &entries {
        indptr[r + 1] += 1;
        indices.push(c);
        values.push(v);
    }
    for r in 0..rows {
        indptr[r + 1] += indptr[r];
    }
    let batch = DataBatch::csr(indptr, indices, values, rows, cols, domain)?;
    SparseDataset::new(batch, None)
}

/// Write a batch in the triplet format; inverse of [`load_sparse`].
pub fn save_sparse(data: &DataBatch, path: &Path, comments: &[String]) -> Result<()> {
    let mut out = String::new();
    for c in comments {
        out.push_str(&format!("# {c}\n"));
    }
    let mut entries = Vec::new();
    for r in 0..data.rows() {
        data.for_each_in_row(r, |c, v| entries.push((r, c, v)));
    }
    out.push_str(&format!("{} {} {}\n", data.rows(), data.cols(), entries.len()));
    for (r, c, v) in entries {
        out.push_str(&format!("{r} {c} {v}\n"));
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Text ingestion
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IngestMode {
    Bow,
    Tfidf,
}

#[derive(Clone, Debug)]
pub struct IngestOptions {
    pub min_token_len: usize,
    pub stopwords: Vec<String>,
    pub mode: IngestMode,
    /// Keep tokens appearing in at least this many documents.
    pub min_df: usize,
    /// Drop tokens appearing in more than this fraction of documents.
    pub max_df_frac: f64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            min_token_len: 2,
            stopwords: Vec::new(),
            mode: IngestMode::Bow,
            min_df: 1,
            max_df_frac: 1.0,
        }
    }
}

fn tokenize(text: &str, min_len: usize) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.len() >= min_len)
        .map(str::to_string)
        .collect()
}

/// Build a count or tf-idf matrix from a directory of plain-text documents,
/// one document per file, files visited in sorted name order.
///
/// The vocabulary is ordered by corpus frequency (ties broken
/// lexicographically), so ingestion is deterministic given the corpus and
/// options. Tf-idf uses the smoothed convention
/// `tf * (ln((1 + N) / (1 + df)) + 1)` followed by l2 row normalization.
pub fn ingest_text(corpus_dir: &Path, options: &IngestOptions) -> Result<SparseDataset> {
    let mut paths: Vec<_> = std::fs::read_dir(corpus_dir)
        .map_err(|e| Error::Ingest {
            path: corpus_dir.display().to_string(),
            msg: e.to_string(),
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Ingest {
            path: corpus_dir.display().to_string(),
            msg: "no documents found".into(),
        });
    }
    let stopwords: std::collections::HashSet<&str> =
        options.stopwords.iter().map(String::as_str).collect();

    let mut docs: Vec<BTreeMap<String, u64>> = Vec::with_capacity(paths.len());
    let mut total_count: BTreeMap<String, u64> = BTreeMap::new();
    let mut doc_freq: BTreeMap<String, usize> = BTreeMap::new();
    for path in &paths {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Ingest {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        let mut counts: BTreeMap<String, u64> = BTreeMap::new();
        for token in tokenize(&text, options.min_token_len) {
            if stopwords.contains(token.as_str()) {
                continue;
            }
            *counts.entry(token).or_insert(0) += 1;
        }
        for (token, c) in &counts {
            *total_count.entry(token.clone()).or_insert(0) += c;
            *doc_freq.entry(token.clone()).or_insert(0) += 1;
        }
        docs.push(counts);
    }

    let n_docs = docs.len();
    let max_df = (options.max_df_frac * n_docs as f64).floor() as usize;
    let mut vocab: Vec<(String, u64)> = total_count
        .into_iter()
        .filter(|(token, _)| {
            let df = doc_freq[token];
            df >= options.min_df && df <= max_df.max(options.min_df)
        })
        .collect();
    vocab.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let vocabulary: Vec<String> = vocab.into_iter().map(|(t, _)| t).collect();
    let index: std::collections::HashMap<&str, usize> = vocabulary
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_str(), i))
        .collect();

    let dim = vocabulary.len();
    let mut indptr = vec![0usize; n_docs + 1];
    let mut indices: Vec<usize> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    for (r, counts) in docs.iter().enumerate() {
        let mut row: Vec<(usize, f64)> = counts
            .iter()
            .filter_map(|(token, &c)| index.get(token.as_str()).map(|&col| (col, c as f64)))
            .collect();
        row.sort_by_key(|&(col, _)| col);
        if options.mode == IngestMode::Tfidf {
            for (col, v) in row.iter_mut() {
                let df = doc_freq[&vocabulary[*col]] as f64;
                let idf = ((1.0 + n_docs as f64) / (1.0 + df)).ln() + 1.0;
                *v *= idf;
            }
            let norm: f64 = row.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                for (_, v) in row.iter_mut() {
                    *v /= norm;
                }
            }
        }
        for (col, v) in row {
            indices.push(col);
            values.push(v);
        }
        indptr[r + 1] = indices.len();
    }
    let domain = match options.mode {
        IngestMode::Bow => Domain::SparseCounts,
        IngestMode::Tfidf => Domain::SparseNonneg,
    };
    let batch = DataBatch::csr(indptr, indices, values, n_docs, dim, domain)?;
    SparseDataset::new(batch, Some(vocabulary))
}

// ---------------------------------------------------------------------------
// Univariate sample files
// ---------------------------------------------------------------------------

/// Write univariate values one per line, preceded by `# key=value` metadata.
pub fn save_univariate(values: &[f64], path: &Path, metadata: &[(String, String)]) -> Result<()> {
    let mut out = String::new();
    for (k, v) in metadata {
        out.push_str(&format!("# {k}={v}\n"));
    }
    for v in values {
        out.push_str(&format!("{v}\n"));
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

/// Read a univariate sample file, returning values and metadata comments.
pub fn load_univariate(path: &Path) -> Result<(Vec<f64>, Vec<(String, String)>)> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut values = Vec::new();
    let mut metadata = Vec::new();
    for (line_no, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('#') {
            if let Some((k, v)) = rest.trim().split_once('=') {
                metadata.push((k.trim().to_string(), v.trim().to_string()));
            }
            continue;
        }
        let v: f64 = trimmed.parse().map_err(|_| Error::Parse {
            line: line_no + 1,
            msg: format!("bad value '{trimmed}'"),
        })?;
        values.push(v);
    }
    Ok((values, metadata))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poismix_mean() {
        let spec = SyntheticSpec { name: SyntheticName::PoisMix, n_samples: 1_000_000, seed: 11 };
        let data = generate_synthetic(&spec).unwrap();
        let mean = data.mean();
        assert!((mean - 10.9).abs() < 0.1, "mean {mean}");
    }

    #[test]
    fn uniform_support() {
        let spec = SyntheticSpec { name: SyntheticName::Uniform, n_samples: 10_000, seed: 3 };
        let data = generate_synthetic(&spec).unwrap();
        assert!(data.dense_values().unwrap().iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert_eq!(data.domain(), Domain::UnitInterval);
    }

    #[test]
    fn gamma_variance() {
        let spec = SyntheticSpec { name: SyntheticName::Gamma, n_samples: 1_000_000, seed: 5 };
        let data = generate_synthetic(&spec).unwrap();
        let values = data.dense_values().unwrap();
        let mean = data.mean();
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / (values.len() - 1) as f64;
        assert!((var - 200.0).abs() < 10.0, "variance {var}");
    }

    #[test]
    fn nbinommix_mean() {
        let spec =
            SyntheticSpec { name: SyntheticName::NbinomMix, n_samples: 400_000, seed: 7 };
        let data = generate_synthetic(&spec).unwrap();
        // 0.75 * 1/9 + 0.25 * 90.
        let expected = 0.75 * (1.0 / 9.0) + 0.25 * 90.0;
        let mean = data.mean();
        assert!((mean - expected).abs() < 0.5, "mean {mean} vs {expected}");
    }

    #[test]
    fn bnb_mean_matches_closed_form() {
        // r b / (a - 1) = 3 for r = 1, a = b = 1.5.
        let spec = SyntheticSpec { name: SyntheticName::Bnb, n_samples: 400_000, seed: 9 };
        let data = generate_synthetic(&spec).unwrap();
        let mean = data.mean();
        // Infinite variance makes this a loose check.
        assert!((mean - 3.0).abs() < 0.6, "mean {mean}");
    }

    #[test]
    fn generation_is_reproducible_and_seed_sensitive() {
        let spec = SyntheticSpec { name: SyntheticName::Gamma, n_samples: 64, seed: 42 };
        let a = generate_synthetic(&spec).unwrap();
        let b = generate_synthetic(&spec).unwrap();
        assert_eq!(a.dense_values().unwrap(), b.dense_values().unwrap());
        let c = generate_synthetic(&SyntheticSpec { seed: 43, ..spec }).unwrap();
        assert_ne!(a.dense_values().unwrap(), c.dense_values().unwrap());
    }

    #[test]
    fn count_law_pmfs_sum_to_one() {
        for (law, cap) in [
            (CountLaw::PoisMix, 400u64),
            (CountLaw::NbinomMix, 4000),
            (CountLaw::Bnb, 40_000_000),
        ] {
            let mut sum = 0.0;
            let mut k = 0;
            while sum < 1.0 - 1e-9 && k < cap {
                sum += law.pmf(k);
                k += 1;
            }
            assert!(sum > 1.0 - 1e-9 && sum < 1.0 + 1e-9, "{law:?} sum {sum}");
        }
    }

    #[test]
    fn bnb_pmf_at_zero_is_half() {
        // P(k = 0) = E[p] = a / (a + b) = 0.5.
        assert!((CountLaw::Bnb.pmf(0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sparse_roundtrip() {
        let dir = std::env::temp_dir().join("jump_sparse_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("fixture.txt");
        std::fs::write(&path, "2 3 2\n0 1 4\n1 2 1.5\n").unwrap();
        let ds = load_sparse(&path).unwrap();
        assert_eq!(ds.rows(), 2);
        assert_eq!(ds.dim(), 3);
        assert_eq!(ds.batch().nnz(), 2);
        assert_eq!(ds.batch().domain(), Domain::SparseNonneg);
        let out = dir.join("roundtrip.txt");
        save_sparse(ds.batch(), &out, &[]).unwrap();
        let ds2 = load_sparse(&out).unwrap();
        assert_eq!(ds2.batch().to_dense_vec(), ds.batch().to_dense_vec());
    }

    #[test]
    fn sparse_rejects_duplicates_with_line_number() {
        let dir = std::env::temp_dir().join("jump_sparse_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("dup.txt");
        std::fs::write(&path, "2 3 3\n0 1 4\n0 1 2\n1 0 1\n").unwrap();
        match load_sparse(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn sparse_empty_is_valid() {
        let dir = std::env::temp_dir().join("jump_sparse_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("empty.txt");
        std::fs::write(&path, "3 4 0\n").unwrap();
        let ds = load_sparse(&path).unwrap();
        assert_eq!(ds.rows(), 3);
        assert_eq!(ds.batch().nnz(), 0);
    }

    fn write_corpus(dir: &Path, docs: &[(&str, &str)]) {
        std::fs::create_dir_all(dir).unwrap();
        for (name, text) in docs {
            std::fs::write(dir.join(name), text).unwrap();
        }
    }

    #[test]
    fn ingest_hand_traceable_counts() {
        let dir = std::env::temp_dir().join("jump_ingest_counts");
        let _ = std::fs::remove_dir_all(&dir);
        write_corpus(&dir, &[("a.txt", "a cat sat"), ("b.txt", "a dog sat")]);
        let opts = IngestOptions {
            min_token_len: 1,
            stopwords: vec!["a".into()],
            ..Default::default()
        };
        let ds = ingest_text(&dir, &opts).unwrap();
        let vocab = ds.vocabulary.clone().unwrap();
        // "sat" appears twice in the corpus, so it leads the vocabulary.
        assert_eq!(vocab, vec!["sat", "cat", "dog"]);
        let dense = ds.batch().to_dense_vec();
        assert_eq!(dense, vec![1.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn ingest_tfidf_downweights_common_tokens() {
        let dir = std::env::temp_dir().join("jump_ingest_tfidf");
        let _ = std::fs::remove_dir_all(&dir);
        write_corpus(&dir, &[("a.txt", "a cat sat"), ("b.txt", "a dog sat")]);
        let opts = IngestOptions {
            min_token_len: 1,
            stopwords: vec!["a".into()],
            mode: IngestMode::Tfidf,
            ..Default::default()
        };
        let ds = ingest_text(&dir, &opts).unwrap();
        let vocab = ds.vocabulary.clone().unwrap();
        let dense = ds.batch().to_dense_vec();
        let col = |t: &str| vocab.iter().position(|v| v == t).unwrap();
        // Within the first row, the df = 2 token gets a smaller weight than
        // the df = 1 token.
        assert!(dense[col("sat")] < dense[col("cat")]);
        // Rows are l2 normalized.
        let norm: f64 = dense[0..3].iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ingest_stopword_only_document_keeps_zero_row() {
        let dir = std::env::temp_dir().join("jump_ingest_zero_row");
        let _ = std::fs::remove_dir_all(&dir);
        write_corpus(&dir, &[("a.txt", "the the the"), ("b.txt", "word other")]);
        let opts = IngestOptions {
            min_token_len: 1,
            stopwords: vec!["the".into()],
            ..Default::default()
        };
        let ds = ingest_text(&dir, &opts).unwrap();
        assert_eq!(ds.rows(), 2);
        let dense = ds.batch().to_dense_vec();
        assert!(dense[0..ds.dim()].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ingest_is_deterministic() {
        let dir = std::env::temp_dir().join("jump_ingest_det");
        let _ = std::fs::remove_dir_all(&dir);
        write_corpus(
            &dir,
            &[("a.txt", "red blue red green"), ("b.txt", "blue blue yellow")],
        );
        let opts = IngestOptions { min_token_len: 1, ..Default::default() };
        let a = ingest_text(&dir, &opts).unwrap();
        let b = ingest_text(&dir, &opts).unwrap();
        assert_eq!(a.vocabulary, b.vocabulary);
        assert_eq!(a.batch().to_dense_vec(), b.batch().to_dense_vec());
    }

    #[test]
    fn univariate_file_roundtrip() {
        let dir = std::env::temp_dir().join("jump_univ_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("samples.txt");
        let values = vec![0.0, 1.5, 2.25, 1e-9];
        save_univariate(&values, &path, &[("fingerprint".into(), "abc".into())]).unwrap();
        let (loaded, meta) = load_univariate(&path).unwrap();
        assert_eq!(loaded, values);
        assert_eq!(meta, vec![("fingerprint".to_string(), "abc".to_string())]);
    }
}
