//! Self-describing binary checkpoint container.
//!
//! Layout, in order:
//!
//! ```text
//! bytes 0..8    magic  "JUMPCKP1"
//! bytes 8..16   header length H as little-endian u64
//! bytes 16..16+H  UTF-8 JSON header
//! remainder     the arrays listed under header.arrays, concatenated, each
//!               value a little-endian IEEE-754 f64
//! ```
//!
//! The header carries the format version, model family, config fingerprint,
//! data domain, model shape, schedule identity and the array directory, so a
//! checkpoint can be loaded with no out-of-band knowledge. Schedule
//! coefficients are stored as explicit arrays rather than re-derived, which
//! makes the round trip bit-exact.

use std::io::{Read, Write};
use std::path::Path;

use crate::ddpm::{GaussianSchedule, Rescaler};
use crate::error::{Error, Result};
use crate::nn::{AdamConfig, AdamState, MlpConfig, MlpModel};
use crate::process::Domain;
use crate::schedule::ThinningSchedule;
use crate::train::Family;

pub const MAGIC: &[u8; 8] = b"JUMPCKP1";
pub const FORMAT_VERSION: u32 = 1;

/// Either diffusion-time parameterization.
#[derive(Clone, Debug)]
pub enum ScheduleKind {
    Thinning(ThinningSchedule),
    Gaussian(GaussianSchedule),
}

impl ScheduleKind {
    pub fn t_steps(&self) -> u32 {
        match self {
            ScheduleKind::Thinning(s) => s.t_steps(),
            ScheduleKind::Gaussian(s) => s.t_steps(),
        }
    }

    pub fn thinning(&self) -> Result<&ThinningSchedule> {
        match self {
            ScheduleKind::Thinning(s) => Ok(s),
            ScheduleKind::Gaussian(_) => Err(Error::Checkpoint(
                "checkpoint holds a gaussian schedule, expected thinning".into(),
            )),
        }
    }

    pub fn gaussian(&self) -> Result<&GaussianSchedule> {
        match self {
            ScheduleKind::Gaussian(s) => Ok(s),
            ScheduleKind::Thinning(_) => Err(Error::Checkpoint(
                "checkpoint holds a thinning schedule, expected gaussian".into(),
            )),
        }
    }
}

/// Everything needed to resume training or to sample.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub family: Family,
    pub fingerprint: String,
    pub domain: Domain,
    pub model: MlpModel,
    pub schedule: ScheduleKind,
    pub rescale: Option<Rescaler>,
    pub adam_config: Option<AdamConfig>,
    pub adam_state: Option<AdamState>,
    pub epoch: u64,
    pub global_step: u64,
    pub seed: u64,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct ArrayEntry {
    name: String,
    len: usize,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct Header {
    format_version: u32,
    family: Family,
    fingerprint: String,
    domain: Domain,
    model: MlpConfig,
    pinned_output: Option<f64>,
    schedule_kind: String,
    lambda: Option<f64>,
    rescale: Option<Rescaler>,
    adam: Option<AdamConfig>,
    adam_step: Option<u64>,
    epoch: u64,
    global_step: u64,
    seed: u64,
    arrays: Vec<ArrayEntry>,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut arrays: Vec<(&str, Vec<f64>)> = Vec::new();
        let (schedule_kind, lambda) = match &self.schedule {
            ScheduleKind::Thinning(s) => {
                arrays.push(("schedule.alphas", s.alphas().to_vec()));
                arrays.push(("schedule.betas", s.betas().to_vec()));
                ("thinning".to_string(), Some(s.lambda()))
            }
            ScheduleKind::Gaussian(s) => {
                arrays.push(("schedule.gauss_betas", s.betas().to_vec()));
                ("gaussian".to_string(), None)
            }
        };
        arrays.push(("model.params", self.model.params().to_vec()));
        if let Some(state) = &self.adam_state {
            arrays.push(("adam.m", state.m.clone()));
            arrays.push(("adam.v", state.v.clone()));
        }

        let header = Header {
            format_version: FORMAT_VERSION,
            family: self.family,
            fingerprint: self.fingerprint.clone(),
            domain: self.domain,
            model: self.model.config.clone(),
            pinned_output: self.model.pinned_output,
            schedule_kind,
            lambda,
            rescale: self.rescale,
            adam: self.adam_config,
            adam_step: self.adam_state.as_ref().map(|s| s.step),
            epoch: self.epoch,
            global_step: self.global_step,
            seed: self.seed,
            arrays: arrays
                .iter()
                .map(|(name, data)| ArrayEntry { name: name.to_string(), len: data.len() })
                .collect(),
        };
        let header_bytes = serde_json::to_vec(&header)
            .map_err(|e| Error::Checkpoint(format!("header encode failed: {e}")))?;

        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        file.write_all(MAGIC)?;
        file.write_all(&(header_bytes.len() as u64).to_le_bytes())?;
        file.write_all(&header_bytes)?;
        for (_, data) in &arrays {
            for v in data {
                file.write_all(&v.to_le_bytes())?;
            }
        }
        file.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 8];
        file.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint(format!(
                "bad magic {magic:?}; not a checkpoint file"
            )));
        }
        let mut len_bytes = [0u8; 8];
        file.read_exact(&mut len_bytes)?;
        let header_len = u64::from_le_bytes(len_bytes) as usize;
        let mut header_bytes = vec![0u8; header_len];
        file.read_exact(&mut header_bytes)?;
        let header: Header = serde_json::from_slice(&header_bytes)
            .map_err(|e| Error::Checkpoint(format!("header decode failed: {e}")))?;
        if header.format_version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {}",
                header.format_version
            )));
        }

        let mut arrays = std::collections::HashMap::new();
        for entry in &header.arrays {
            let mut data = vec![0.0f64; entry.len];
            let mut buf = [0u8; 8];
            for slot in data.iter_mut() {
                file.read_exact(&mut buf)?;
                *slot = f64::from_le_bytes(buf);
            }
            arrays.insert(entry.name.clone(), data);
        }
        let mut take = |name: &str| -> Result<Vec<f64>> {
            arrays
                .remove(name)
                .ok_or_else(|| Error::Checkpoint(format!("missing array '{name}'")))
        };

        let schedule = match header.schedule_kind.as_str() {
            "thinning" => {
                let lambda = header
                    .lambda
                    .ok_or_else(|| Error::Checkpoint("thinning schedule without lambda".into()))?;
                ScheduleKind::Thinning(ThinningSchedule::from_arrays(
                    lambda,
                    take("schedule.alphas")?,
                    take("schedule.betas")?,
                )?)
            }
            "gaussian" => {
                ScheduleKind::Gaussian(GaussianSchedule::from_betas(take("schedule.gauss_betas")?)?)
            }
            other => {
                return Err(Error::Checkpoint(format!("unknown schedule kind '{other}'")));
            }
        };

        let model = MlpModel::from_parts(header.model, take("model.params")?, header.pinned_output)?;
        let adam_state = match (arrays.remove("adam.m"), arrays.remove("adam.v"), header.adam_step)
        {
            (Some(m), Some(v), Some(step)) => {
                if m.len() != model.n_params() || v.len() != model.n_params() {
                    return Err(Error::Checkpoint("optimizer moment shape mismatch".into()));
                }
                Some(AdamState { m, v, step })
            }
            (None, None, _) => None,
            _ => return Err(Error::Checkpoint("incomplete optimizer state".into())),
        };

        Ok(Checkpoint {
            family: header.family,
            fingerprint: header.fingerprint,
            domain: header.domain,
            model,
            schedule,
            rescale: header.rescale,
            adam_config: header.adam,
            adam_state,
            epoch: header.epoch,
            global_step: header.global_step,
            seed: header.seed,
        })
    }
}
