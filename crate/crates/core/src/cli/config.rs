//! Experiment configuration: one JSON document with dot-path overrides.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::certify::CertifyOptions;
use crate::encode::{load_csv, synth_dataset, Dataset, EncodingKind};
use crate::error::{Error, Result};
use crate::rotnoise::NoiseConfig;
use crate::vqc::TrainConfig;

/// Environment variable that overrides `master_seed`.
pub const SEED_ENV: &str = "ROTSMOOTH_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSource {
    Synthetic { seed: u64, n: usize, margin: f64 },
    Csv { path: PathBuf },
}

impl DatasetSource {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DatasetSource::Synthetic { seed, n, margin } => synth_dataset(*n, *seed, *margin),
            DatasetSource::Csv { path } => load_csv(path),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub h_values: Vec<f64>,
    pub shot_sizes: Vec<u64>,
    pub repeats: usize,
    /// Angle draws averaged per input in each cell.
    #[serde(default = "one")]
    pub n_noise: usize,
    /// Worker threads for sweep cells; 0 uses every core.
    #[serde(default)]
    pub workers: usize,
}

fn one() -> usize {
    1
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            h_values: [4, 8, 16].iter().map(|&k| 2.0 * PI / f64::powi(2.0, k)).collect(),
            shot_sizes: vec![100, 1_000, 10_000, 100_000],
            repeats: 5,
            n_noise: 1,
            workers: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackConfig {
    pub budget: usize,
    /// Attack radius as a multiple of each input's certified radius, used
    /// when no absolute radius is given.
    pub radius_scale: f64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            budget: 1000,
            radius_scale: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    pub n_pairs: usize,
    pub tau_d: f64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            n_pairs: 500,
            tau_d: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub test_fraction: f64,
    pub encoding: EncodingKind,
    pub ansatz_depth: usize,
    pub train: TrainConfig,
    pub noise: NoiseConfig,
    pub certify: CertifyOptions,
    pub sweep: Option<SweepConfig>,
    pub attack: AttackConfig,
    pub audit: AuditConfig,
    pub output_dir: PathBuf,
    pub master_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSource::Synthetic {
                seed: 7,
                n: 200,
                margin: 0.4,
            },
            test_fraction: 0.25,
            encoding: EncodingKind::Angle,
            ansatz_depth: crate::vqc::DEFAULT_LAYERS,
            train: TrainConfig::default(),
            noise: NoiseConfig::tan_bounded(3, 0.01, 0.1, 0.5),
            certify: CertifyOptions::default(),
            sweep: Some(SweepConfig::default()),
            attack: AttackConfig::default(),
            audit: AuditConfig::default(),
            output_dir: PathBuf::from("out"),
            master_seed: 7,
        }
    }
}

impl ExperimentConfig {
    /// Reads `path` (or the defaults), then applies the seed environment
    /// variable and finally each `key.path=value` override.
    pub fn resolve(path: Option<&Path>, overrides: &[String], env_seed: Option<&str>) -> Result<Self> {
        let base = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                serde_json::from_str::<ExperimentConfig>(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            None => ExperimentConfig::default(),
        };
        let mut value = serde_json::to_value(&base)?;
        if let Some(seed) = env_seed {
            let seed: u64 = seed
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV}={seed:?} is not an unsigned integer")))?;
            value["master_seed"] = Value::from(seed);
        }
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let cfg: ExperimentConfig =
            serde_json::from_value(value).map_err(|e| Error::Config(format!("after overrides: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.test_fraction) {
            return Err(Error::Config(format!(
                "test_fraction {} outside [0, 1)",
                self.test_fraction
            )));
        }
        if self.ansatz_depth == 0 {
            return Err(Error::Config("ansatz_depth must be at least 1".into()));
        }
        self.train.validate()?;
        self.noise.validate()?;
        self.certify.validate()?;
        if let Some(s) = &self.sweep {
            if s.h_values.is_empty() {
                return Err(Error::Config("sweep.h_values is empty".into()));
            }
            if s.shot_sizes.is_empty() || s.shot_sizes.contains(&0) {
                return Err(Error::Config("sweep.shot_sizes must be non-empty and positive".into()));
            }
            if s.repeats == 0 || s.n_noise == 0 {
                return Err(Error::Config("sweep.repeats and sweep.n_noise must be positive".into()));
            }
        }
        if self.attack.budget == 0 {
            return Err(Error::Config("attack.budget must be at least 1".into()));
        }
        if let DatasetSource::Csv { path } = &self.dataset {
            if !path.is_file() {
                return Err(Error::Dataset {
                    path: path.clone(),
                    message: "file not found".into(),
                });
            }
        }
        Ok(())
    }

    /// Canonical JSON of the resolved configuration.
    pub fn canonical_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn sha256(&self) -> Result<String> {
        Ok(sha256_hex(self.canonical_json()?.as_bytes()))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Sets the field at a dot path, parsing the value as JSON and falling back
/// to a plain string.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {assignment:?} is not key=value")))?;
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Config(format!("bad override path {path:?}")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    for (i, key) in keys.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("{} is not an object", keys[..i].join("."))))?;
        let slot = obj
            .get_mut(*key)
            .ok_or_else(|| Error::Config(format!("unknown config field {}", keys[..=i].join("."))))?;
        if i + 1 == keys.len() {
            *slot = value;
            return Ok(());
        }
        node = slot;
    }
    unreachable!("override path has at least one key")
}
