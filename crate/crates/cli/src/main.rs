use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use jump_cli::runner::{
    cmd_check, cmd_eval, cmd_reproduce, cmd_sample, cmd_train, EvalArgs, ReproduceArgs,
    SampleArgs, TrainArgs,
};
use jump_cli::{presets, HarnessError};

/// Train, sample and evaluate count-thinning generative models against a
/// Gaussian diffusion baseline.
#[derive(Parser)]
#[command(name = "jump", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model from a config file or preset name.
    Train {
        /// Config file path or preset name (see `reproduce --list`).
        #[arg(long)]
        config: String,
        /// Master seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (1 = strict serial mode).
        #[arg(long)]
        threads: Option<usize>,
        /// Output directory override.
        #[arg(long, value_name = "DIR")]
        output_dir: Option<PathBuf>,
        /// Resume from an epoch checkpoint written by `checkpoint_every`.
        #[arg(long, value_name = "CKPT")]
        resume: Option<PathBuf>,
    },
    /// Generate samples from a checkpoint.
    Sample {
        #[arg(long, value_name = "CKPT")]
        checkpoint: PathBuf,
        /// Number of samples to generate.
        #[arg(long)]
        n: usize,
        /// Decoding: g_of_z0 or f_at_t1.
        #[arg(long, default_value = "g_of_z0")]
        mode: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Independent-run index (changes the random streams).
        #[arg(long, default_value_t = 0)]
        run: u32,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Evaluate generated samples against the configured dataset.
    Eval {
        #[arg(long)]
        config: String,
        #[arg(long, value_name = "CKPT")]
        checkpoint: Option<PathBuf>,
        /// Pre-generated sample files (one per run) instead of a checkpoint.
        #[arg(long, value_name = "FILE", num_args = 1..)]
        samples: Vec<PathBuf>,
        /// Number of independent evaluation runs.
        #[arg(long)]
        runs: Option<u32>,
        #[arg(long, value_name = "DIR")]
        output_dir: Option<PathBuf>,
        /// Evaluate even when fingerprints do not match.
        #[arg(long)]
        force: bool,
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Run the analytic/brute-force identity suite.
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train, sample and evaluate a named preset end to end.
    Reproduce {
        /// Preset name, e.g. poismix_jump_ci.
        preset: Option<String>,
        /// List available presets.
        #[arg(long)]
        list: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long, value_name = "DIR")]
        output_dir: Option<PathBuf>,
    },
    /// Print a preset as TOML, or dump all presets to a directory.
    Preset {
        name: Option<String>,
        /// Write every preset to --dir as TOML files.
        #[arg(long)]
        dump_all: bool,
        #[arg(long, value_name = "DIR", default_value = "presets")]
        dir: PathBuf,
    },
}

fn run() -> Result<(), HarnessError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Train { config, seed, threads, output_dir, resume } => {
            let config = presets::load_config_arg(&config)?;
            let summary = cmd_train(TrainArgs { config, output_dir, seed, threads, resume })?;
            println!(
                "trained {} steps, final loss {:.6}",
                summary.steps, summary.final_loss
            );
            println!("checkpoint: {}", summary.checkpoint_path.display());
            println!("metrics:    {}", summary.metrics_path.display());
            Ok(())
        }
        Command::Sample { checkpoint, n, mode, seed, run, out, threads } => {
            let mode = jump::sampling::SampleMode::parse(&mode)
                .map_err(|e| HarnessError::Config(e.to_string()))?;
            let path = cmd_sample(SampleArgs { checkpoint, n, mode, seed, run, out, threads })?;
            println!("samples: {}", path.display());
            Ok(())
        }
        Command::Eval { config, checkpoint, samples, runs, output_dir, force, threads } => {
            let config = presets::load_config_arg(&config)?;
            let summary = cmd_eval(EvalArgs {
                config,
                checkpoint,
                samples,
                runs,
                output_dir,
                force,
                threads,
            })?;
            for report in &summary.reports {
                println!(
                    "{}: mean {:.6}{} over {} run(s)",
                    report.metric,
                    report.mean,
                    report
                        .std
                        .map(|s| format!(" +/- {s:.6}"))
                        .unwrap_or_default(),
                    report.per_run.len()
                );
            }
            println!("report: {}", summary.report_txt.display());
            Ok(())
        }
        Command::Check { seed } => {
            let table = cmd_check(seed)?;
            print!("{table}");
            Ok(())
        }
        Command::Reproduce { preset, list, seed, threads, output_dir } => {
            if list {
                for name in presets::preset_names() {
                    println!("{name}");
                }
                return Ok(());
            }
            let preset = preset.ok_or_else(|| {
                HarnessError::Config("reproduce needs a preset name or --list".into())
            })?;
            let out = cmd_reproduce(ReproduceArgs { preset, seed, threads, output_dir })?;
            print!("{out}");
            Ok(())
        }
        Command::Preset { name, dump_all, dir } => {
            if dump_all {
                std::fs::create_dir_all(&dir)?;
                for name in presets::preset_names() {
                    let config = presets::build(&name)?;
                    std::fs::write(dir.join(format!("{name}.toml")), config.to_toml_string())?;
                }
                println!("wrote {} presets to {}", presets::preset_names().len(), dir.display());
                return Ok(());
            }
            let name = name.ok_or_else(|| {
                HarnessError::Config("preset needs a name or --dump-all".into())
            })?;
            print!("{}", presets::build(&name)?.to_toml_string());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
