//! Experiment configuration: a single TOML file fully determines a run.
//!
//! The schema (all sections shown with their defaults where one exists):
//!
//! ```toml
//! [experiment]
//! name = "poismix_jump_ci"
//! seed = 1
//! family = "jump"            # jump | binjump | ddpm
//! output_dir = "runs/poismix_jump_ci"
//!
//! [dataset]
//! kind = "synthetic"         # synthetic | sparse | text
//! name = "poismix"           # synthetic: poismix nbinommix bnb gamma
//!                            #   half_cauchy half_t uniform beta_half beta_two
//! n_samples = 20000          # synthetic only
//! # path = "data/matrix.txt"     # sparse: triplet file
//! # path = "data/mini_corpus"    # text: directory of documents
//! # mode = "bow"                 # text: bow | tfidf
//! # min_token_len = 2            # text
//! # stopwords_path = "data/stopwords.txt"
//! # min_df = 1
//! # max_df_frac = 1.0
//!
//! [schedule]
//! t_steps = 1000
//! beta1 = 0.001              # ddpm default is 0.0001
//! lambda = 10.0              # count families only
//! target_log_snr = -12.0     # count families: solves beta_end
//! # beta_end = 0.02          # explicit end value instead of calibration
//!
//! [model]
//! hidden = 128
//! time_embed_dim = 128
//! input_scaling = "by_lambda"   # by_lambda | unbiased
//!
//! [training]
//! batch_size = 256
//! epochs = 600
//! optimizer = "adam"         # adam | adamw
//! lr = 0.001
//! weight_decay = 0.0
//! checkpoint_every = 0       # epochs between checkpoints; 0 = final only
//! threads = 1
//!
//! [evaluation]
//! n_generated = 100000
//! runs = 5
//! sample_mode = "g_of_z0"    # g_of_z0 | f_at_t1
//! chunk = 4096
//! ```

use std::path::{Path, PathBuf};

use jump::nn::InputScaling;
use jump::sampling::SampleMode;
use jump::train::Family;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::HarnessError;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub dataset: DatasetSection,
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub model: ModelSection,
    pub training: TrainingSection,
    pub evaluation: EvaluationSection,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentSection {
    pub name: String,
    pub seed: u64,
    pub family: Family,
    pub output_dir: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DatasetSection {
    pub kind: DatasetKind,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub n_samples: Option<usize>,
    #[serde(default)]
    pub path: Option<String>,
    #[serde(default)]
    pub mode: Option<String>,
    #[serde(default = "default_min_token_len")]
    pub min_token_len: usize,
    #[serde(default)]
    pub stopwords_path: Option<String>,
    #[serde(default = "default_min_df")]
    pub min_df: usize,
    #[serde(default = "default_max_df_frac")]
    pub max_df_frac: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Synthetic,
    Sparse,
    Text,
}

fn default_min_token_len() -> usize {
    2
}

fn default_min_df() -> usize {
    1
}

fn default_max_df_frac() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScheduleSection {
    pub t_steps: u32,
    pub beta1: f64,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub target_log_snr: Option<f64>,
    #[serde(default)]
    pub beta_end: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelSection {
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    #[serde(default = "default_time_embed_dim")]
    pub time_embed_dim: usize,
    #[serde(default = "default_input_scaling")]
    pub input_scaling: InputScaling,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            hidden: default_hidden(),
            time_embed_dim: default_time_embed_dim(),
            input_scaling: default_input_scaling(),
        }
    }
}

fn default_hidden() -> usize {
    128
}

fn default_time_embed_dim() -> usize {
    128
}

fn default_input_scaling() -> InputScaling {
    InputScaling::ByLambda
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainingSection {
    pub batch_size: usize,
    pub epochs: u64,
    #[serde(default = "default_optimizer")]
    pub optimizer: String,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default)]
    pub weight_decay: f64,
    #[serde(default)]
    pub checkpoint_every: u64,
    #[serde(default = "default_threads")]
    pub threads: usize,
}

fn default_optimizer() -> String {
    "adam".to_string()
}

fn default_lr() -> f64 {
    1e-3
}

fn default_threads() -> usize {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvaluationSection {
    pub n_generated: usize,
    #[serde(default = "default_runs")]
    pub runs: u32,
    #[serde(default = "default_sample_mode")]
    pub sample_mode: SampleMode,
    #[serde(default = "default_chunk")]
    pub chunk: usize,
}

fn default_runs() -> u32 {
    1
}

fn default_sample_mode() -> SampleMode {
    SampleMode::GOfZ0
}

fn default_chunk() -> usize {
    4096
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let config: ExperimentConfig = toml::from_str(text)
            .map_err(|e| HarnessError::Config(format!("config parse failed: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            HarnessError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        match self.dataset.kind {
            DatasetKind::Synthetic => {
                if self.dataset.name.is_none() || self.dataset.n_samples.is_none() {
                    return bad("synthetic dataset needs `name` and `n_samples`".into());
                }
                jump::datasets::SyntheticName::parse(self.dataset.name.as_deref().unwrap())
                    .map_err(|e| HarnessError::Config(e.to_string()))?;
            }
            DatasetKind::Sparse | DatasetKind::Text => {
                if self.dataset.path.is_none() {
                    return bad("sparse/text dataset needs `path`".into());
                }
                if self.dataset.kind == DatasetKind::Text {
                    match self.dataset.mode.as_deref() {
                        Some("bow") | Some("tfidf") => {}
                        other => {
                            return bad(format!(
                                "text dataset mode must be bow or tfidf, got {other:?}"
                            ));
                        }
                    }
                }
            }
        }
        match self.experiment.family {
            Family::Jump | Family::BinJump => {
                let lambda = self
                    .schedule
                    .lambda
                    .ok_or_else(|| HarnessError::Config("count families need `lambda`".into()))?;
                if !(lambda.is_finite() && lambda > 0.0) {
                    return bad(format!("lambda must be positive, got {lambda}"));
                }
                if self.experiment.family == Family::BinJump && lambda != 1.0 {
                    return bad("the binomial variant decodes raw counts; set lambda = 1".into());
                }
                if self.schedule.beta_end.is_none() && self.schedule.target_log_snr.is_none() {
                    return bad("schedule needs `beta_end` or `target_log_snr`".into());
                }
            }
            Family::Ddpm => {
                if self.schedule.beta_end.is_none() {
                    return bad("the gaussian baseline needs an explicit `beta_end`".into());
                }
            }
        }
        if self.schedule.t_steps == 0 {
            return bad("t_steps must be >= 1".into());
        }
        if !(self.schedule.beta1 > 0.0 && self.schedule.beta1 < 1.0) {
            return bad(format!("beta1 must lie in (0, 1), got {}", self.schedule.beta1));
        }
        match self.training.optimizer.as_str() {
            "adam" | "adamw" => {}
            other => return bad(format!("optimizer must be adam or adamw, got '{other}'")),
        }
        if self.training.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if self.evaluation.n_generated == 0 || self.evaluation.runs == 0 {
            return bad("evaluation needs n_generated >= 1 and runs >= 1".into());
        }
        if self.model.time_embed_dim < 2 || self.model.time_embed_dim % 2 != 0 {
            return bad("time_embed_dim must be even and >= 2".into());
        }
        Ok(())
    }

    /// Hash of everything that defines the trained artifact: family, dataset,
    /// schedule and model shape. Training length and evaluation settings do
    /// not change the fingerprint.
    pub fn fingerprint(&self) -> String {
        #[derive(Serialize)]
        struct FingerprintInput<'a> {
            family: Family,
            seed: u64,
            dataset: &'a DatasetSection,
            schedule: &'a ScheduleSection,
            model: &'a ModelSection,
        }
        let input = FingerprintInput {
            family: self.experiment.family,
            seed: self.experiment.seed,
            dataset: &self.dataset,
            schedule: &self.schedule,
            model: &self.model,
        };
        let json = serde_json::to_vec(&input).expect("fingerprint input serializes");
        let digest = Sha256::digest(&json);
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn adam_config(&self) -> jump::nn::AdamConfig {
        jump::nn::AdamConfig {
            lr: self.training.lr,
            weight_decay: self.training.weight_decay,
            decoupled: self.training.optimizer == "adamw",
            ..Default::default()
        }
    }

    /// Output directory: an explicit CLI override wins, otherwise the config
    /// path under the root from `JUMP_OUTPUT_ROOT` (default the working
    /// directory).
    pub fn resolve_output_dir(&self, cli_override: Option<&Path>) -> PathBuf {
        if let Some(dir) = cli_override {
            return dir.to_path_buf();
        }
        let root = std::env::var("JUMP_OUTPUT_ROOT").unwrap_or_else(|_| ".".to_string());
        Path::new(&root).join(&self.experiment.output_dir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_toml() -> String {
        r#"
[experiment]
name = "t"
seed = 1
family = "jump"
output_dir = "runs/t"

[dataset]
kind = "synthetic"
name = "poismix"
n_samples = 100

[schedule]
t_steps = 10
beta1 = 0.001
lambda = 10.0
target_log_snr = -12.0

[training]
batch_size = 32
epochs = 1

[evaluation]
n_generated = 10
"#
        .to_string()
    }

    #[test]
    fn parses_and_roundtrips() {
        let c = ExperimentConfig::from_toml_str(&minimal_toml()).unwrap();
        assert_eq!(c.experiment.family, Family::Jump);
        assert_eq!(c.model.hidden, 128);
        let text = c.to_toml_string();
        let c2 = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(c.fingerprint(), c2.fingerprint());
    }

    #[test]
    fn fingerprint_tracks_model_inputs_only() {
        let a = ExperimentConfig::from_toml_str(&minimal_toml()).unwrap();
        let mut b = a.clone();
        b.training.epochs = 99;
        b.evaluation.runs = 7;
        assert_eq!(a.fingerprint(), b.fingerprint());
        let mut c = a.clone();
        c.schedule.lambda = Some(100.0);
        assert_ne!(a.fingerprint(), c.fingerprint());
        let mut d = a.clone();
        d.experiment.seed = 2;
        assert_ne!(a.fingerprint(), d.fingerprint());
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = ExperimentConfig::from_toml_str(&minimal_toml()).unwrap();
        c.dataset.name = Some("nope".into());
        assert!(c.validate().is_err());

        let mut c = ExperimentConfig::from_toml_str(&minimal_toml()).unwrap();
        c.experiment.family = Family::BinJump;
        assert!(c.validate().is_err());
        c.schedule.lambda = Some(1.0);
        assert!(c.validate().is_ok());

        let mut c = ExperimentConfig::from_toml_str(&minimal_toml()).unwrap();
        c.training.optimizer = "sgd".into();
        assert!(c.validate().is_err());
    }
}
