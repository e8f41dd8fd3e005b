use std::path::Path;

use jetssm_core::audio::MelConfig;
use jetssm_core::dataset::{GeneratorConfig, PROFILE_COLUMNS};
use jetssm_core::nn::ModelConfig;
use jetssm_core::training::{TrainConfig, TrialSpace};
use jetssm_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::io::read_json;

pub const SEED_ENV: &str = "JETSSM_SEED";

/// Everything a command may need. Precedence: flags, then the config file,
/// then these defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub generator: GeneratorConfig,
    pub mel: MelConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub space: TrialSpace,
    pub tau_um: f64,
    pub workers: usize,
    /// Number of clips `synth` writes.
    pub trials: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            generator: GeneratorConfig::default(),
            mel: MelConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            space: TrialSpace::default(),
            tau_um: 1.0,
            workers: 4,
            trials: 1,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => read_json(p),
            None => Ok(Self::default()),
        }
    }

    /// Every violated invariant, one per line, each prefixed by its section.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let mut check = |section: &str, r: Result<()>| {
            if let Err(e) = r {
                let msg = match e {
                    Error::InvalidArgument(m) => m,
                    other => other.to_string(),
                };
                for part in msg.split("; ") {
                    problems.push(format!("{section}: {part}"));
                }
            }
        };
        check("generator", self.generator.validate());
        check("model", self.model.validate());
        check("train", self.train.validate());
        check("space", self.space.validate());
        check("mel", self.mel.filterbank(self.generator.sample_rate).map(|_| ()));
        if self.model.out_channels != PROFILE_COLUMNS {
            problems.push(format!(
                "model: out_channels must be {PROFILE_COLUMNS}, got {}",
                self.model.out_channels
            ));
        }
        if !(self.tau_um > 0.0 && self.tau_um.is_finite()) {
            problems.push(format!("tau_um must be positive, got {}", self.tau_um));
        }
        if self.workers == 0 {
            problems.push("workers must be >= 1".into());
        }
        if self.trials == 0 {
            problems.push("trials must be >= 1".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "invalid configuration:\n  {}",
                problems.join("\n  ")
            )))
        }
    }

    /// Flag, then config file, then `JETSSM_SEED`; otherwise a fresh seed is
    /// drawn and logged.
    pub fn resolve_seed(&mut self, flag: Option<u64>) -> Result<u64> {
        let seed = match flag.or(self.seed) {
            Some(s) => s,
            None => match std::env::var(SEED_ENV) {
                Ok(v) => v.trim().parse().map_err(|_| {
                    Error::InvalidArgument(format!("{SEED_ENV}={v:?} is not an unsigned integer"))
                })?,
                Err(_) => {
                    let s: u64 = rand::random::<u32>() as u64;
                    log::info!("no seed given; using generated seed {s}");
                    s
                }
            },
        };
        log::info!("seed {seed}");
        self.seed = Some(seed);
        self.generator.seed = seed;
        self.train.seed = seed;
        Ok(seed)
    }

    /// Model config with the input width matched to the mel front end.
    pub fn model_for_data(&self) -> ModelConfig {
        ModelConfig {
            in_channels: self.mel.n_mels + PROFILE_COLUMNS,
            ..self.model.clone()
        }
    }
}
