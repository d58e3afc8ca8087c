//! Declarative experiment configuration: a JSON file with full defaulting
//! (a minimal config names only the dataset and paths) plus `ADVHAR_`
//! environment-variable overrides for any key.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ingest::DatasetKind;
use crate::synth::SyntheticSpec;
use crate::trainer::{DiscriminationTask, TrainingConfig};

pub const CONFIG_VERSION: u32 = 1;
pub const ENV_PREFIX: &str = "ADVHAR_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub version: u32,
    pub dataset: DatasetKind,
    /// Directory of raw recordings, required for the real datasets.
    pub raw_dir: Option<PathBuf>,
    /// Generator parameters, required when dataset is SYNTHETIC.
    pub synthetic: Option<SyntheticSpec>,
    pub out_dir: PathBuf,
    pub training: TrainingConfig,
    /// Size of the training pair set A'.
    pub pair_target_train: usize,
    /// Size of the held-out pair set used to monitor the discriminator.
    pub pair_target_val: usize,
    pub repeats: usize,
    pub seed: u64,
    pub task: DiscriminationTask,
    pub jobs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig::defaults_for(DatasetKind::Synthetic)
    }
}

fn default_pair_targets(kind: DatasetKind) -> (usize, usize) {
    match kind {
        DatasetKind::Pamap2 => (50_000, 10_000),
        DatasetKind::Mhealth => (10_000, 2_000),
        DatasetKind::Realdisp => (50_000, 10_000),
        DatasetKind::Synthetic => (1_000, 200),
    }
}

impl ExperimentConfig {
    /// Full defaults for one dataset: reference hyperparameters and pair
    /// sizes, 2 repeats, single job.
    pub fn defaults_for(kind: DatasetKind) -> Self {
        let (pt, pv) = default_pair_targets(kind);
        ExperimentConfig {
            version: CONFIG_VERSION,
            dataset: kind,
            raw_dir: None,
            synthetic: (kind == DatasetKind::Synthetic).then(SyntheticSpec::default),
            out_dir: PathBuf::from("out"),
            training: TrainingConfig::for_dataset(kind),
            pair_target_train: pt,
            pair_target_val: pv,
            repeats: 2,
            seed: 0,
            task: DiscriminationTask::ActivityPairs,
            jobs: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        match self.dataset {
            DatasetKind::Synthetic => {
                if self.synthetic.is_none() {
                    return Err(Error::Config(
                        "dataset SYNTHETIC requires a 'synthetic' section".into(),
                    ));
                }
            }
            _ => {
                if self.raw_dir.is_none() {
                    return Err(Error::Config(format!(
                        "dataset {} requires 'raw_dir'",
                        self.dataset
                    )));
                }
            }
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be >= 1".into()));
        }
        if self.jobs == 0 {
            return Err(Error::Config("jobs must be >= 1".into()));
        }
        if self.pair_target_train < 2 || self.pair_target_val < 2 {
            return Err(Error::Config("pair targets must be >= 2".into()));
        }
        Ok(())
    }

    /// Read, default-fill, env-override, and validate a config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let user: Value = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_value(user, std::env::vars())
    }

    /// Same as `load` but from an in-memory value and explicit environment,
    /// so overrides are testable without mutating the process environment.
    pub fn from_value(
        mut user: Value,
        env: impl Iterator<Item = (String, String)>,
    ) -> Result<Self> {
        if !user.is_object() {
            return Err(Error::Config("config root must be a JSON object".into()));
        }
        apply_env_overrides(&mut user, env)?;
        // Defaults depend on the dataset, so peek at it before merging.
        let kind = match user.get("dataset") {
            Some(v) => serde_json::from_value(v.clone())
                .map_err(|e| Error::Config(format!("dataset: {e}")))?,
            None => DatasetKind::Synthetic,
        };
        let mut merged = serde_json::to_value(ExperimentConfig::defaults_for(kind))
            .expect("defaults serialize");
        deep_merge(&mut merged, user);
        let cfg: ExperimentConfig = serde_json::from_value(merged)
            .map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// SHA-256 over the canonical serialized form; embedded in every
    /// artifact this config produces.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut h = Sha256::new();
        h.update(json.as_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Overlay `patch` onto `base`, recursing into objects and replacing
/// everything else.
fn deep_merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => deep_merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// `ADVHAR_TRAINING__SEED=7` sets key path `training.seed`; a double
/// underscore separates path segments, and values parse as JSON with a
/// plain-string fallback.
fn apply_env_overrides(
    root: &mut Value,
    env: impl Iterator<Item = (String, String)>,
) -> Result<()> {
    let mut overrides: Vec<(String, String)> = env
        .filter(|(k, _)| k.starts_with(ENV_PREFIX))
        .collect();
    overrides.sort();
    for (key, raw) in overrides {
        let path: Vec<String> = key[ENV_PREFIX.len()..]
            .split("__")
            .map(|s| s.to_ascii_lowercase())
            .collect();
        if path.iter().any(|s| s.is_empty()) {
            return Err(Error::Config(format!("malformed override variable {key}")));
        }
        let value: Value =
            serde_json::from_str(&raw).unwrap_or_else(|_| Value::String(raw.clone()));
        let mut slot = &mut *root;
        for seg in &path[..path.len() - 1] {
            slot = slot
                .as_object_mut()
                .ok_or_else(|| {
                    Error::Config(format!("override {key} descends into a non-object"))
                })?
                .entry(seg.clone())
                .or_insert_with(|| Value::Object(Default::default()));
        }
        slot.as_object_mut()
            .ok_or_else(|| Error::Config(format!("override {key} descends into a non-object")))?
            .insert(path.last().unwrap().clone(), value);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn no_env() -> impl Iterator<Item = (String, String)> {
        std::iter::empty()
    }

    #[test]
    fn minimal_config_gets_full_defaults() {
        let cfg =
            ExperimentConfig::from_value(json!({ "dataset": "SYNTHETIC" }), no_env()).unwrap();
        assert_eq!(cfg.version, 1);
        assert_eq!(cfg.training.step1.epochs, 15);
        assert_eq!(cfg.training.step3.epochs, 150);
        assert_eq!(cfg.repeats, 2);
        assert!(cfg.synthetic.is_some());
    }

    #[test]
    fn dataset_specific_batch_and_pair_defaults() {
        let cfg = ExperimentConfig::from_value(
            json!({ "dataset": "MHEALTH", "raw_dir": "/data/mhealth" }),
            no_env(),
        )
        .unwrap();
        assert_eq!(cfg.training.batch_size_a, 32);
        assert_eq!(cfg.training.batch_size_aprime, 375);
        assert_eq!(cfg.pair_target_train, 10_000);
        let cfg = ExperimentConfig::from_value(
            json!({ "dataset": "PAMAP2", "raw_dir": "/data/p" }),
            no_env(),
        )
        .unwrap();
        assert_eq!(cfg.training.batch_size_a, 64);
        assert_eq!(cfg.pair_target_train, 50_000);
    }

    #[test]
    fn partial_training_section_keeps_other_defaults() {
        let cfg = ExperimentConfig::from_value(
            json!({ "dataset": "SYNTHETIC", "training": { "seed": 9 } }),
            no_env(),
        )
        .unwrap();
        assert_eq!(cfg.training.seed, 9);
        assert_eq!(cfg.training.step2.lr_d, 1e-3);
    }

    #[test]
    fn round_trip_is_identity() {
        let cfg = ExperimentConfig::defaults_for(DatasetKind::Synthetic);
        let json = serde_json::to_value(&cfg).unwrap();
        let back = ExperimentConfig::from_value(json, no_env()).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.digest(), back.digest());
    }

    #[test]
    fn env_override_nested_key() {
        let env = vec![
            ("ADVHAR_SEED".to_string(), "42".to_string()),
            ("ADVHAR_TRAINING__STEP3__EPOCHS".to_string(), "7".to_string()),
            ("OTHER_VAR".to_string(), "ignored".to_string()),
        ];
        let cfg = ExperimentConfig::from_value(
            json!({ "dataset": "SYNTHETIC" }),
            env.into_iter(),
        )
        .unwrap();
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.training.step3.epochs, 7);
    }

    #[test]
    fn env_override_beats_file_value() {
        let env = vec![("ADVHAR_REPEATS".to_string(), "5".to_string())];
        let cfg = ExperimentConfig::from_value(
            json!({ "dataset": "SYNTHETIC", "repeats": 3 }),
            env.into_iter(),
        )
        .unwrap();
        assert_eq!(cfg.repeats, 5);
    }

    #[test]
    fn unknown_key_rejected() {
        let err =
            ExperimentConfig::from_value(json!({ "dataset": "SYNTHETIC", "typo": 1 }), no_env());
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn real_dataset_requires_raw_dir() {
        let err = ExperimentConfig::from_value(json!({ "dataset": "PAMAP2" }), no_env());
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn digest_changes_with_content() {
        let a = ExperimentConfig::defaults_for(DatasetKind::Synthetic);
        let mut b = a.clone();
        b.seed = 1;
        assert_ne!(a.digest(), b.digest());
    }

    #[test]
    fn bad_version_rejected() {
        let err = ExperimentConfig::from_value(
            json!({ "dataset": "SYNTHETIC", "version": 2 }),
            no_env(),
        );
        assert!(matches!(err, Err(Error::Config(_))));
    }
}
