//! The run configuration: one JSON document driving every command, with
//! command-line overrides taking precedence.
//!
//! `master_seed` is the single reproducibility knob: the synthesis seed and
//! every training seed derive from it, so a config file plus the binary
//! pins the whole pipeline. Every command echoes the FNV-1a hash of the
//! resolved configuration for audit logs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use erpstream_core::net::NetworkHyper;
use erpstream_core::rng::{fnv1a64, hex64, Rng};
use erpstream_core::synth::SynthConfig;
use erpstream_core::train::TrainConfig;

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    pub dataset_dir: PathBuf,
    pub models_dir: PathBuf,
    pub reports_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            dataset_dir: PathBuf::from("data"),
            models_dir: PathBuf::from("models"),
            reports_dir: PathBuf::from("reports"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub master_seed: u64,
    pub synth: SynthConfig,
    pub train: TrainConfig,
    pub network: NetworkHyper,
    pub paths: Paths,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            master_seed: 42,
            synth: SynthConfig::default(),
            train: TrainConfig::default(),
            network: NetworkHyper::default(),
            paths: Paths::default(),
        }
    }
}

impl RunConfig {
    /// Loads the file (when given or present), applies the seed override,
    /// and derives the synthesis and training seeds from the master seed.
    pub fn resolve(path: Option<&Path>, seed_override: Option<u64>) -> Result<RunConfig, CliError> {
        let mut config = match path {
            Some(p) => {
                let bytes = fs::read(p).map_err(|e| CliError::io(p, e))?;
                serde_json::from_slice(&bytes)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => RunConfig::default(),
        };
        if let Some(seed) = seed_override {
            config.master_seed = seed;
        }
        let master = Rng::new(config.master_seed);
        config.synth.seed = master.derive("synth").seed();
        config.train.seed = master.derive("train").seed();
        Ok(config)
    }

    /// FNV-1a hash of the canonical JSON of the resolved config.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex64(fnv1a64(&json))
    }
}
