//! Named experiment presets.
//!
//! Every benchmark dataset gets one preset per model family and scale.
//! `ci` presets finish in minutes on one core; `paper` presets use the full
//! hyperparameters (lambda 10 or 100, T = 1000, Adam at 1e-3, 600 epochs,
//! 100k samples, 5 evaluation runs) and take up to about an hour per dataset;
//! `smoke` is a seconds-long variant for determinism and wiring tests.
//! `presets/` in the repository root holds the same configurations as plain
//! TOML, written by `jump preset --dump-all`.

use jump::datasets::SyntheticName;
use jump::train::Family;

use crate::config::*;
use crate::HarnessError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scale {
    Smoke,
    Ci,
    Paper,
}

impl Scale {
    pub fn parse(s: &str) -> Result<Self, HarnessError> {
        match s {
            "smoke" => Ok(Scale::Smoke),
            "ci" => Ok(Scale::Ci),
            "paper" => Ok(Scale::Paper),
            other => Err(HarnessError::Config(format!("unknown scale '{other}'"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scale::Smoke => "smoke",
            Scale::Ci => "ci",
            Scale::Paper => "paper",
        }
    }
}

const SYNTHETIC: &[&str] = &[
    "poismix",
    "nbinommix",
    "bnb",
    "gamma",
    "half_cauchy",
    "half_t",
    "uniform",
    "beta_half",
    "beta_two",
];

/// All preset names, `<dataset>_<family>_<scale>`.
pub fn preset_names() -> Vec<String> {
    let mut names = Vec::new();
    for ds in SYNTHETIC {
        for family in ["jump", "ddpm"] {
            for scale in ["smoke", "ci", "paper"] {
                names.push(format!("{ds}_{family}_{scale}"));
            }
        }
    }
    for scale in ["smoke", "ci", "paper"] {
        names.push(format!("poismix_binjump_{scale}"));
    }
    for ds in ["bow_mini", "tfidf_mini"] {
        for family in ["jump", "ddpm"] {
            for scale in ["ci", "paper"] {
                names.push(format!("{ds}_{family}_{scale}"));
            }
        }
    }
    names
}

/// Build a preset configuration by name.
pub fn build(name: &str) -> Result<ExperimentConfig, HarnessError> {
    let (dataset, family, scale) = split_name(name)?;
    let family_enum = Family::parse(family).map_err(|e| HarnessError::Config(e.to_string()))?;
    let config = match dataset {
        d if SYNTHETIC.contains(&d) => synthetic_preset(d, family_enum, scale, name)?,
        "bow_mini" | "tfidf_mini" => doc_preset(dataset, family_enum, scale, name)?,
        other => {
            return Err(HarnessError::Config(format!(
                "unknown preset dataset '{other}'"
            )));
        }
    };
    config.validate()?;
    Ok(config)
}

fn split_name(name: &str) -> Result<(&str, &str, Scale), HarnessError> {
    for family in ["binjump", "jump", "ddpm"] {
        for scale in ["smoke", "ci", "paper"] {
            let suffix = format!("_{family}_{scale}");
            if let Some(dataset) = name.strip_suffix(&suffix) {
                return Ok((dataset, family, Scale::parse(scale)?));
            }
        }
    }
    Err(HarnessError::Config(format!(
        "unknown preset '{name}'; try `jump reproduce --list`"
    )))
}

fn synthetic_preset(
    dataset: &str,
    family: Family,
    scale: Scale,
    name: &str,
) -> Result<ExperimentConfig, HarnessError> {
    let syn = SyntheticName::parse(dataset).map_err(|e| HarnessError::Config(e.to_string()))?;
    let unit_interval = matches!(
        syn,
        SyntheticName::Uniform | SyntheticName::BetaHalf | SyntheticName::BetaTwo
    );
    let (n_samples, epochs, t_steps, n_generated, runs, time_embed_dim) = match scale {
        Scale::Smoke => (5_000, 10, 100, 2_000, 1, 64),
        Scale::Ci => (20_000, 100, 200, 20_000, 1, 64),
        Scale::Paper => (100_000, 600, 1_000, 100_000, 5, 128),
    };
    let lambda = match family {
        Family::BinJump => 1.0,
        _ if unit_interval => 100.0,
        _ => 10.0,
    };
    let schedule = match family {
        Family::Ddpm => ScheduleSection {
            t_steps,
            beta1: 1e-4,
            lambda: None,
            target_log_snr: None,
            beta_end: Some(0.02),
        },
        _ => ScheduleSection {
            t_steps,
            beta1: 0.001,
            lambda: Some(lambda),
            target_log_snr: Some(-12.0),
            beta_end: None,
        },
    };
    Ok(ExperimentConfig {
        experiment: ExperimentSection {
            name: name.to_string(),
            seed: 1,
            family,
            output_dir: format!("runs/{name}"),
        },
        dataset: DatasetSection {
            kind: DatasetKind::Synthetic,
            name: Some(dataset.to_string()),
            n_samples: Some(n_samples),
            path: None,
            mode: None,
            min_token_len: 2,
            stopwords_path: None,
            min_df: 1,
            max_df_frac: 1.0,
        },
        schedule,
        model: ModelSection {
            hidden: 128,
            time_embed_dim,
            input_scaling: jump::nn::InputScaling::ByLambda,
        },
        training: TrainingSection {
            batch_size: 256,
            epochs,
            optimizer: "adam".into(),
            lr: 1e-3,
            weight_decay: 0.0,
            checkpoint_every: 0,
            threads: 1,
        },
        evaluation: EvaluationSection {
            n_generated,
            runs,
            sample_mode: jump::sampling::SampleMode::GOfZ0,
            chunk: 4096,
        },
    })
}

fn doc_preset(
    dataset: &str,
    family: Family,
    scale: Scale,
    name: &str,
) -> Result<ExperimentConfig, HarnessError> {
    if family == Family::BinJump && dataset != "bow_mini" {
        return Err(HarnessError::Config(
            "the binomial variant needs count-valued data".into(),
        ));
    }
    let mode = if dataset == "bow_mini" { "bow" } else { "tfidf" };
    let (epochs, t_steps, n_generated, runs) = match scale {
        Scale::Smoke | Scale::Ci => (1_200, 200, 512, 1),
        Scale::Paper => (4_000, 1_000, 2_048, 5),
    };
    let lambda = if mode == "bow" { 10.0 } else { 100.0 };
    let schedule = match family {
        Family::Ddpm => ScheduleSection {
            t_steps,
            beta1: 1e-4,
            lambda: None,
            target_log_snr: None,
            beta_end: Some(0.02),
        },
        _ => ScheduleSection {
            t_steps,
            beta1: 0.001,
            lambda: Some(lambda),
            target_log_snr: Some(-12.0),
            beta_end: None,
        },
    };
    Ok(ExperimentConfig {
        experiment: ExperimentSection {
            name: name.to_string(),
            seed: 1,
            family,
            output_dir: format!("runs/{name}"),
        },
        dataset: DatasetSection {
            kind: DatasetKind::Text,
            name: None,
            n_samples: None,
            path: Some("data/mini_corpus".into()),
            mode: Some(mode.into()),
            min_token_len: 2,
            stopwords_path: Some("data/stopwords.txt".into()),
            min_df: 1,
            max_df_frac: 1.0,
        },
        schedule,
        model: ModelSection {
            hidden: 128,
            time_embed_dim: 64,
            input_scaling: jump::nn::InputScaling::ByLambda,
        },
        training: TrainingSection {
            batch_size: 64,
            epochs,
            optimizer: "adam".into(),
            lr: 1e-3,
            weight_decay: 0.0,
            checkpoint_every: 0,
            threads: 1,
        },
        evaluation: EvaluationSection {
            n_generated,
            runs,
            sample_mode: jump::sampling::SampleMode::GOfZ0,
            chunk: 256,
        },
    })
}

/// `--config` arguments accept either a file path or a preset name.
pub fn load_config_arg(arg: &str) -> Result<ExperimentConfig, HarnessError> {
    let path = std::path::Path::new(arg);
    if path.exists() {
        ExperimentConfig::load(path)
    } else {
        build(arg)
    }
}
