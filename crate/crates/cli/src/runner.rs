//! Command implementations behind the CLI surface.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use jump::checkpoint::{Checkpoint, ScheduleKind};
use jump::checks;
use jump::datasets::{
    self, IngestMode, IngestOptions, SyntheticName, SyntheticSpec,
};
use jump::ddpm::{GaussianSchedule, Rescaler};
use jump::evaluation::{
    aggregate, summary_stats, wasserstein1_empirical, wasserstein1_vs_true, DocStatMode,
    EvalReport, TrueLaw,
};
use jump::nn::{AdamState, MlpConfig, MlpModel, OutputHead};
use jump::process::{DataBatch, Domain};
use jump::rngdist::RngStream;
use jump::sampling::{sample_count_model, sample_ddpm, SampleMode, SampleOptions};
use jump::schedule::{calibrate_end_snr, ThinningSchedule};
use jump::streams::{stream_id, Space};
use jump::train::{train, Family, TrainOptions};

use crate::config::{DatasetKind, ExperimentConfig};
use crate::HarnessError;

type Result<T> = std::result::Result<T, HarnessError>;

// ---------------------------------------------------------------------------
// Dataset assembly
// ---------------------------------------------------------------------------

/// Training data plus what evaluation needs to know about its source.
pub struct BuiltDataset {
    pub batch: DataBatch,
    pub synthetic: Option<SyntheticName>,
    pub doc_mode: Option<DocStatMode>,
}

pub fn build_dataset(config: &ExperimentConfig) -> Result<BuiltDataset> {
    match config.dataset.kind {
        DatasetKind::Synthetic => {
            let name = SyntheticName::parse(config.dataset.name.as_deref().unwrap())?;
            let spec = SyntheticSpec {
                name,
                n_samples: config.dataset.n_samples.unwrap(),
                seed: config.experiment.seed,
            };
            let batch = datasets::generate_synthetic(&spec)?;
            Ok(BuiltDataset { batch, synthetic: Some(name), doc_mode: None })
        }
        DatasetKind::Sparse => {
            let path = PathBuf::from(config.dataset.path.as_deref().unwrap());
            let ds = datasets::load_sparse(&path)?;
            let doc_mode = match ds.batch().domain() {
                Domain::SparseCounts => DocStatMode::Bow,
                _ => DocStatMode::Tfidf,
            };
            Ok(BuiltDataset { batch: ds.batch().clone(), synthetic: None, doc_mode: Some(doc_mode) })
        }
        DatasetKind::Text => {
            let dir = PathBuf::from(config.dataset.path.as_deref().unwrap());
            let mode = match config.dataset.mode.as_deref() {
                Some("tfidf") => IngestMode::Tfidf,
                _ => IngestMode::Bow,
            };
            let stopwords = match &config.dataset.stopwords_path {
                Some(p) => std::fs::read_to_string(p)
                    .map_err(|e| HarnessError::Data(format!("cannot read stopwords {p}: {e}")))?
                    .split_whitespace()
                    .map(str::to_string)
                    .collect(),
                None => Vec::new(),
            };
            let opts = IngestOptions {
                min_token_len: config.dataset.min_token_len,
                stopwords,
                mode,
                min_df: config.dataset.min_df,
                max_df_frac: config.dataset.max_df_frac,
            };
            let ds = datasets::ingest_text(&dir, &opts)?;
            let doc_mode = match mode {
                IngestMode::Bow => DocStatMode::Bow,
                IngestMode::Tfidf => DocStatMode::Tfidf,
            };
            Ok(BuiltDataset { batch: ds.batch().clone(), synthetic: None, doc_mode: Some(doc_mode) })
        }
    }
}

// ---------------------------------------------------------------------------
// Model and schedule assembly
// ---------------------------------------------------------------------------

fn head_for(config: &ExperimentConfig, domain: Domain) -> OutputHead {
    match config.experiment.family {
        Family::Ddpm => OutputHead::Linear,
        _ => match domain {
            Domain::UnitInterval => OutputHead::SigmoidScaled { scale: 1.0 },
            _ => OutputHead::Softplus,
        },
    }
}

fn init_model(config: &ExperimentConfig, data: &DataBatch) -> Result<MlpModel> {
    let d = data.cols();
    let head = head_for(config, data.domain());
    let output_mean = match config.experiment.family {
        Family::Ddpm => 0.0,
        _ => data.mean(),
    };
    let cfg = MlpConfig {
        input_dim: d,
        output_dim: d,
        hidden: config.model.hidden,
        time_embed_dim: config.model.time_embed_dim,
        head,
        input_scaling: config.model.input_scaling,
    };
    let mut rng = RngStream::new(config.experiment.seed, stream_id(Space::Init, 0));
    Ok(MlpModel::init(cfg, output_mean, &mut rng)?)
}

pub fn build_thinning_schedule(
    config: &ExperimentConfig,
    data_mean: f64,
) -> Result<ThinningSchedule> {
    let lambda = config.schedule.lambda.expect("validated");
    let beta_end = match (config.schedule.beta_end, config.schedule.target_log_snr) {
        (Some(b), _) => b,
        (None, Some(target)) => calibrate_end_snr(
            config.schedule.t_steps,
            config.schedule.beta1,
            lambda,
            data_mean,
            target,
        )?,
        (None, None) => unreachable!("validated"),
    };
    Ok(ThinningSchedule::beta_linear(
        config.schedule.t_steps,
        config.schedule.beta1,
        beta_end,
        lambda,
    )?)
}

fn build_gaussian_schedule(config: &ExperimentConfig) -> Result<GaussianSchedule> {
    Ok(GaussianSchedule::beta_linear(
        config.schedule.t_steps,
        config.schedule.beta1,
        config.schedule.beta_end.expect("validated"),
    )?)
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

pub struct TrainArgs {
    pub config: ExperimentConfig,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub resume: Option<PathBuf>,
}

pub struct TrainSummary {
    pub checkpoint_path: PathBuf,
    pub metrics_path: PathBuf,
    pub output_dir: PathBuf,
    pub final_loss: f64,
    pub steps: u64,
}

pub fn cmd_train(args: TrainArgs) -> Result<TrainSummary> {
    let mut config = args.config;
    if let Some(seed) = args.seed {
        config.experiment.seed = seed;
    }
    if let Some(threads) = args.threads {
        config.training.threads = threads;
    }
    config.validate()?;
    let fingerprint = config.fingerprint();
    let out_dir = config.resolve_output_dir(args.output_dir.as_deref());
    std::fs::create_dir_all(&out_dir).map_err(|e| {
        HarnessError::Data(format!("cannot create {}: {e}", out_dir.display()))
    })?;
    std::fs::write(out_dir.join("config.toml"), config.to_toml_string())
        .map_err(|e| HarnessError::Data(format!("cannot write config copy: {e}")))?;

    let built = build_dataset(&config)?;
    let data = &built.batch;
    let family = config.experiment.family;
    let mean = data.mean();

    let (thinning, gaussian, rescaler) = match family {
        Family::Jump | Family::BinJump => (Some(build_thinning_schedule(&config, mean)?), None, None),
        Family::Ddpm => (
            None,
            Some(build_gaussian_schedule(&config)?),
            Some(Rescaler::fit(data)?),
        ),
    };

    let (model, adam_state, start_epoch) = match &args.resume {
        Some(path) => {
            let ckpt = Checkpoint::load(path)?;
            if ckpt.fingerprint != fingerprint {
                return Err(HarnessError::Config(format!(
                    "resume checkpoint fingerprint {} does not match config {}",
                    ckpt.fingerprint, fingerprint
                )));
            }
            let state = ckpt.adam_state.ok_or_else(|| {
                HarnessError::Data("resume checkpoint lacks optimizer state".into())
            })?;
            (ckpt.model, state, ckpt.epoch)
        }
        None => {
            let model = init_model(&config, data)?;
            let n = model.n_params();
            (model, AdamState::new(n), 0)
        }
    };

    let metrics_path = out_dir.join("metrics.log");
    let mut metrics = std::io::BufWriter::new(
        std::fs::OpenOptions::new()
            .create(true)
            .append(args.resume.is_some())
            .write(true)
            .truncate(args.resume.is_none())
            .open(&metrics_path)?,
    );
    writeln!(metrics, "# fingerprint={fingerprint}")?;
    writeln!(metrics, "# step\tloss\telapsed_sec")?;

    let opts = TrainOptions {
        batch_size: config.training.batch_size,
        epochs: config.training.epochs,
        adam: config.adam_config(),
        seed: config.experiment.seed,
        threads: config.training.threads.max(1),
        start_epoch,
    };

    let make_checkpoint = |model: &MlpModel, state: &AdamState, epoch: u64, step: u64| Checkpoint {
        family,
        fingerprint: fingerprint.clone(),
        domain: data.domain(),
        model: model.clone(),
        schedule: match (&thinning, &gaussian) {
            (Some(s), _) => ScheduleKind::Thinning((*s).clone()),
            (_, Some(g)) => ScheduleKind::Gaussian((*g).clone()),
            _ => unreachable!(),
        },
        rescale: rescaler,
        adam_config: Some(config.adam_config()),
        adam_state: Some(state.clone()),
        epoch,
        global_step: step,
        seed: config.experiment.seed,
    };

    let every = config.training.checkpoint_every;
    let out_dir_for_epochs = out_dir.clone();
    let mut on_epoch = |epoch: u64, model: &MlpModel, state: &AdamState, step: u64| {
        if every > 0 && epoch % every == 0 && epoch < config.training.epochs {
            let path = out_dir_for_epochs.join(format!("checkpoint_epoch{epoch}.ckpt"));
            make_checkpoint(model, state, epoch, step).save(&path)?;
        }
        Ok(())
    };
    let mut on_step = |rec: jump::train::StepRecord| {
        let _ = writeln!(
            metrics,
            "{}\t{}\t{:.3}",
            rec.step, rec.loss, rec.elapsed_sec
        );
    };

    let outcome = train(
        family,
        data,
        thinning.as_ref(),
        gaussian.as_ref(),
        rescaler.as_ref(),
        model,
        adam_state,
        &opts,
        &mut on_step,
        &mut on_epoch,
    )?;
    metrics.flush()?;

    let checkpoint_path = out_dir.join("checkpoint.ckpt");
    make_checkpoint(
        &outcome.model,
        &outcome.adam_state,
        outcome.epochs_run,
        outcome.global_step,
    )
    .save(&checkpoint_path)?;

    Ok(TrainSummary {
        checkpoint_path,
        metrics_path,
        output_dir: out_dir,
        final_loss: outcome.final_loss,
        steps: outcome.global_step,
    })
}

// ---------------------------------------------------------------------------
// sample
// ---------------------------------------------------------------------------

pub struct SampleArgs {
    pub checkpoint: PathBuf,
    pub n: usize,
    pub mode: SampleMode,
    pub seed: Option<u64>,
    pub run: u32,
    pub out: PathBuf,
    pub threads: usize,
}

pub fn cmd_sample(args: SampleArgs) -> Result<PathBuf> {
    let ckpt = Checkpoint::load(&args.checkpoint)?;
    let batch = generate_batch(&ckpt, args.n, args.mode, args.seed.unwrap_or(ckpt.seed), args.run, args.threads, 4096)?;
    write_samples(&batch, &ckpt, &args, &args.out)?;
    Ok(args.out.clone())
}

/// Generate one batch of samples from a checkpoint.
pub fn generate_batch(
    ckpt: &Checkpoint,
    n: usize,
    mode: SampleMode,
    seed: u64,
    run: u32,
    threads: usize,
    chunk: usize,
) -> Result<DataBatch> {
    let opts = SampleOptions { n, chunk, seed, run, mode, threads };
    let batch = match ckpt.family {
        Family::Jump | Family::BinJump => sample_count_model(
            ckpt.family,
            &ckpt.model,
            ckpt.schedule.thinning()?,
            ckpt.domain,
            &opts,
        )?,
        Family::Ddpm => {
            let rescaler = ckpt
                .rescale
                .ok_or_else(|| HarnessError::Data("gaussian checkpoint lacks a rescaler".into()))?;
            sample_ddpm(
                &ckpt.model,
                ckpt.schedule.gaussian()?,
                &rescaler,
                ckpt.domain,
                &opts,
            )?
        }
    };
    Ok(batch)
}

fn write_samples(batch: &DataBatch, ckpt: &Checkpoint, args: &SampleArgs, out: &Path) -> Result<()> {
    if let Some(dir) = out.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let meta = vec![
        ("fingerprint".to_string(), ckpt.fingerprint.clone()),
        ("family".to_string(), ckpt.family.as_str().to_string()),
        ("mode".to_string(), args.mode.as_str().to_string()),
        ("seed".to_string(), args.seed.unwrap_or(ckpt.seed).to_string()),
        ("run".to_string(), args.run.to_string()),
    ];
    if batch.cols() == 1 {
        let values = batch.dense_values()?.to_vec();
        datasets::save_univariate(&values, out, &meta)?;
    } else {
        let comments: Vec<String> = meta.into_iter().map(|(k, v)| format!("{k}={v}")).collect();
        datasets::save_sparse(batch, out, &comments)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

pub struct EvalArgs {
    pub config: ExperimentConfig,
    pub checkpoint: Option<PathBuf>,
    pub samples: Vec<PathBuf>,
    pub runs: Option<u32>,
    pub output_dir: Option<PathBuf>,
    pub force: bool,
    pub threads: usize,
}

pub struct EvalSummary {
    pub reports: Vec<EvalReport>,
    pub report_txt: PathBuf,
    pub report_tsv: PathBuf,
    pub out_dir: PathBuf,
}

pub fn cmd_eval(args: EvalArgs) -> Result<EvalSummary> {
    let config = &args.config;
    config.validate()?;
    let fingerprint = config.fingerprint();
    let out_dir = config
        .resolve_output_dir(args.output_dir.as_deref())
        .join("eval");
    std::fs::create_dir_all(&out_dir)?;

    let built = build_dataset(config)?;
    let runs = args.runs.unwrap_or(config.evaluation.runs).max(1);

    // Assemble per-run sample batches.
    let mut batches: Vec<DataBatch> = Vec::new();
    if !args.samples.is_empty() {
        for path in &args.samples {
            let (batch, file_fp) = load_samples_file(path, built.batch.cols())?;
            if let Some(fp) = file_fp {
                if fp != fingerprint && !args.force {
                    return Err(HarnessError::Config(format!(
                        "samples file {} carries fingerprint {fp}, config is {fingerprint}; \
                         pass --force to evaluate anyway",
                        path.display()
                    )));
                }
            }
            batches.push(batch);
        }
    } else {
        let ckpt_path = args.checkpoint.as_ref().ok_or_else(|| {
            HarnessError::Config("eval needs --checkpoint or --samples".into())
        })?;
        let ckpt = Checkpoint::load(ckpt_path)?;
        if ckpt.fingerprint != fingerprint && !args.force {
            return Err(HarnessError::Config(format!(
                "checkpoint fingerprint {} does not match config {fingerprint}; \
                 pass --force to evaluate anyway",
                ckpt.fingerprint
            )));
        }
        for run in 0..runs {
            batches.push(generate_batch(
                &ckpt,
                config.evaluation.n_generated,
                config.evaluation.sample_mode,
                config.experiment.seed,
                run,
                args.threads,
                config.evaluation.chunk,
            )?);
        }
    }

    // Metric pathways.
    let mut reports = Vec::new();
    if let Some(doc_mode) = built.doc_mode {
        let truth = summary_stats(&built.batch, doc_mode);
        let mut sparsity_runs = Vec::new();
        let mut magnitude_runs = Vec::new();
        for (r, batch) in batches.iter().enumerate() {
            let stats = summary_stats(batch, doc_mode);
            sparsity_runs.push(wasserstein1_empirical(&stats.sparsity, &truth.sparsity)?);
            magnitude_runs.push(wasserstein1_empirical(&stats.magnitude, &truth.magnitude)?);
            write_histogram(&stats.sparsity, &out_dir.join(format!("hist_sparsity_run{r}.tsv")))?;
        }
        let magnitude_name = match doc_mode {
            DocStatMode::Bow => "length_w1",
            DocStatMode::Tfidf => "l1_norm_w1",
        };
        reports.push(aggregate("sparsity_w1", &sparsity_runs, &fingerprint)?);
        reports.push(aggregate(magnitude_name, &magnitude_runs, &fingerprint)?);
    } else {
        let name = built.synthetic.expect("univariate datasets are synthetic");
        let mut w1_runs = Vec::new();
        let metric = if name.count_law().is_some() { "w1_true" } else { "w1_train" };
        let train_values = built.batch.dense_values()?;
        for (r, batch) in batches.iter().enumerate() {
            let values = batch.dense_values()?;
            let w1 = match name.count_law() {
                Some(law) => {
                    wasserstein1_vs_true(values, &TrueLaw::DiscretePmf(&|k| law.pmf(k)))?
                }
                None => wasserstein1_vs_true(values, &TrueLaw::Reference(train_values))?,
            };
            w1_runs.push(w1);
            write_histogram(values, &out_dir.join(format!("hist_samples_run{r}.tsv")))?;
        }
        reports.push(aggregate(metric, &w1_runs, &fingerprint)?);
    }

    let report_txt = out_dir.join("report.txt");
    let report_tsv = out_dir.join("report.tsv");
    write_reports(config, &fingerprint, &reports, &report_txt, &report_tsv)?;
    Ok(EvalSummary { reports, report_txt, report_tsv, out_dir })
}

fn load_samples_file(path: &Path, expected_cols: usize) -> Result<(DataBatch, Option<String>)> {
    if expected_cols == 1 {
        let (values, meta) = datasets::load_univariate(path)?;
        let fp = meta.iter().find(|(k, _)| k == "fingerprint").map(|(_, v)| v.clone());
        // Loaded samples are generic non-negative reals; the metric path does
        // not depend on the declared domain.
        let batch = DataBatch::univariate(values, Domain::NonnegReal)
            .map_err(|e| HarnessError::Data(e.to_string()))?;
        Ok((batch, fp))
    } else {
        let fp = scan_fingerprint_comment(path)?;
        let ds = datasets::load_sparse(path)?;
        Ok((ds.batch().clone(), fp))
    }
}

fn scan_fingerprint_comment(path: &Path) -> Result<Option<String>> {
    use std::io::BufRead;
    let file = std::fs::File::open(path)?;
    for line in std::io::BufReader::new(file).lines() {
        let line = line?;
        let trimmed = line.trim();
        if !trimmed.starts_with('#') {
            break;
        }
        if let Some((k, v)) = trimmed.trim_start_matches('#').trim().split_once('=') {
            if k.trim() == "fingerprint" {
                return Ok(Some(v.trim().to_string()));
            }
        }
    }
    Ok(None)
}

fn write_histogram(values: &[f64], path: &Path) -> Result<()> {
    let mut out = String::from("# bin_lo\tbin_hi\tcount\n");
    if values.is_empty() {
        std::fs::write(path, out)?;
        return Ok(());
    }
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let integral = values.iter().all(|v| v.fract() == 0.0) && max - min <= 10_000.0;
    if integral {
        let lo = min as i64;
        let hi = max as i64;
        let mut counts = vec![0u64; (hi - lo + 1) as usize];
        for &v in values {
            counts[(v as i64 - lo) as usize] += 1;
        }
        for (i, c) in counts.iter().enumerate() {
            if *c > 0 {
                let k = lo + i as i64;
                out.push_str(&format!("{k}\t{k}\t{c}\n"));
            }
        }
    } else {
        let bins = 60usize;
        let width = ((max - min) / bins as f64).max(f64::MIN_POSITIVE);
        let mut counts = vec![0u64; bins];
        for &v in values {
            let idx = (((v - min) / width) as usize).min(bins - 1);
            counts[idx] += 1;
        }
        for (i, c) in counts.iter().enumerate() {
            let lo = min + i as f64 * width;
            out.push_str(&format!("{lo}\t{}\t{c}\n", lo + width));
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn write_reports(
    config: &ExperimentConfig,
    fingerprint: &str,
    reports: &[EvalReport],
    txt_path: &Path,
    tsv_path: &Path,
) -> Result<()> {
    let mut tsv = format!("# fingerprint={fingerprint}\nmetric\trun\tvalue\n");
    for report in reports {
        for (r, v) in report.per_run.iter().enumerate() {
            tsv.push_str(&format!("{}\t{r}\t{v}\n", report.metric));
        }
    }
    std::fs::write(tsv_path, tsv)?;

    let mut txt = String::new();
    txt.push_str(&format!("experiment: {}\n", config.experiment.name));
    txt.push_str(&format!("fingerprint: {fingerprint}\n"));
    txt.push_str(&format!(
        "family: {}   samples/run: {}   sample mode: {}\n",
        config.experiment.family.as_str(),
        config.evaluation.n_generated,
        config.evaluation.sample_mode.as_str(),
    ));
    let truth_mode = if config.dataset.kind == DatasetKind::Synthetic {
        match SyntheticName::parse(config.dataset.name.as_deref().unwrap_or(""))
            .ok()
            .and_then(|n| n.count_law())
        {
            Some(_) => "analytic pmf",
            None => "empirical training reference",
        }
    } else {
        "training-corpus summary statistics"
    };
    txt.push_str(&format!("truth mode: {truth_mode}\n\n"));
    txt.push_str(&format!("{:<16} {:>12} {:>12} {:>6}\n", "metric", "mean", "std", "runs"));
    for report in reports {
        txt.push_str(&format!(
            "{:<16} {:>12.6} {:>12} {:>6}\n",
            report.metric,
            report.mean,
            report
                .std
                .map(|s| format!("{s:.6}"))
                .unwrap_or_else(|| "-".to_string()),
            report.per_run.len()
        ));
        let runs_line: Vec<String> = report.per_run.iter().map(|v| format!("{v:.6}")).collect();
        txt.push_str(&format!("  per-run: {}\n", runs_line.join(" ")));
    }
    std::fs::write(txt_path, txt)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// check
// ---------------------------------------------------------------------------

pub fn cmd_check(seed: u64) -> Result<String> {
    let results = checks::run_all(seed)?;
    let mut out = String::new();
    out.push_str(&format!(
        "{:<44} {:>12}    {:<14} {}\n",
        "check", "value", "bound", "result"
    ));
    let mut all_passed = true;
    for r in &results {
        let rel = match r.kind {
            checks::Bound::AtMost => "<=",
            checks::Bound::AtLeast => ">=",
        };
        out.push_str(&format!(
            "{:<44} {:>12.3e}    {rel} {:<9.1e} {}  ({:.2}s)\n",
            r.name,
            r.value,
            r.bound,
            if r.passed { "pass" } else { "FAIL" },
            r.seconds
        ));
        all_passed &= r.passed;
    }
    if all_passed {
        Ok(out)
    } else {
        Err(HarnessError::CheckFailed(out))
    }
}

// ---------------------------------------------------------------------------
// reproduce
// ---------------------------------------------------------------------------

pub struct ReproduceArgs {
    pub preset: String,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

pub fn cmd_reproduce(args: ReproduceArgs) -> Result<String> {
    let config = crate::presets::build(&args.preset)?;
    let started = Instant::now();
    let train_summary = cmd_train(TrainArgs {
        config: config.clone(),
        output_dir: args.output_dir.clone(),
        seed: args.seed,
        threads: args.threads,
        resume: None,
    })?;
    let mut config_for_eval = config.clone();
    if let Some(seed) = args.seed {
        config_for_eval.experiment.seed = seed;
    }
    let eval_summary = cmd_eval(EvalArgs {
        config: config_for_eval,
        checkpoint: Some(train_summary.checkpoint_path.clone()),
        samples: Vec::new(),
        runs: None,
        output_dir: args.output_dir.clone(),
        force: false,
        threads: args.threads.unwrap_or(1),
    })?;
    let mut out = String::new();
    out.push_str(&format!(
        "{}: trained {} steps (final loss {:.6}) in {:.1}s\n",
        args.preset,
        train_summary.steps,
        train_summary.final_loss,
        started.elapsed().as_secs_f64()
    ));
    for report in &eval_summary.reports {
        out.push_str(&format!(
            "  {} = {:.6}{}  (runs: {})\n",
            report.metric,
            report.mean,
            report
                .std
                .map(|s| format!(" +/- {s:.6}"))
                .unwrap_or_default(),
            report.per_run.len()
        ));
    }
    out.push_str(&format!("  reports: {}\n", eval_summary.report_txt.display()));
    Ok(out)
}
