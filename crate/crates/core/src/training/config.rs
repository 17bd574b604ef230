use serde::{Deserialize, Serialize};

use crate::envs::EnvKind;
use crate::error::{Error, Result};
use crate::neural::PredictorActivations;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    #[serde(rename = "3sil")]
    ThreeSil,
    Bc,
    A2c,
    SilPaac,
    Ppo,
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "3sil" => Ok(Algorithm::ThreeSil),
            "bc" => Ok(Algorithm::Bc),
            "a2c" => Ok(Algorithm::A2c),
            "sil-paac" => Ok(Algorithm::SilPaac),
            "ppo" => Ok(Algorithm::Ppo),
            _ => Err(Error::Config(format!("unknown algorithm `{s}`"))),
        }
    }
}

/// Every training knob. Files hold flat `key = value` lines (TOML syntax)
/// that override the defaults of the chosen environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub env: EnvKind,
    pub algorithm: Algorithm,
    pub seed: u64,
    /// Solutions kept per problem.
    pub k: usize,
    pub batch_size: usize,
    pub batches_per_epoch: usize,
    /// Episodes collected in epoch 0.
    pub warmup_episodes: usize,
    /// Episodes collected in every later epoch.
    pub episodes_per_epoch: usize,
    pub max_epochs: usize,
    /// Chance of a uniformly random legal action during collection.
    pub noise: f64,
    /// Sampling weight of unsolved problems relative to solved ones.
    pub bias: f64,
    pub prune: bool,
    pub step_limit: usize,
    /// Curriculum level size; 0 trains on every problem from the start.
    pub block_size: usize,
    pub advance_threshold: f64,
    /// Problems drawn with replacement for the per-epoch greedy check.
    pub eval_sample: usize,
    /// Stop once the last level has been passed.
    pub stop_when_complete: bool,
    /// Replay every stored solution at the end of each epoch.
    pub verify_history: bool,
    pub lr: f64,
    /// Internal representation size.
    pub n: usize,
    pub hidden: usize,
    pub activations: PredictorActivations,
    /// FIFO buffer of behavioural cloning, in episodes.
    pub bc_buffer: usize,
    pub gamma: f64,
    pub n_step: usize,
    pub ppo_update_every: usize,
    pub ppo_epochs: usize,
    pub ppo_lr: f64,
    pub ppo_clip: f64,
    pub sil_buffer: usize,
    pub sil_exponent: f64,
    pub sil_transitions: usize,
    pub sil_value_weight: f64,
}

impl TrainConfig {
    pub fn for_env(env: EnvKind) -> Self {
        let mut c = TrainConfig {
            env,
            algorithm: Algorithm::ThreeSil,
            seed: 0,
            k: 1,
            batch_size: 32,
            batches_per_epoch: 250,
            warmup_episodes: 1000,
            episodes_per_epoch: 1000,
            max_epochs: 100,
            noise: 0.05,
            bias: 1.0,
            prune: false,
            step_limit: env.default_step_limit(),
            block_size: 400,
            advance_threshold: 0.95,
            eval_sample: 400,
            stop_when_complete: false,
            verify_history: false,
            lr: 1e-3,
            n: if env == EnvKind::Ra { 16 } else { 32 },
            hidden: 64,
            activations: PredictorActivations::default(),
            bc_buffer: 40_000,
            gamma: 0.99,
            n_step: 5,
            ppo_update_every: 2000,
            ppo_epochs: 4,
            ppo_lr: 0.002,
            ppo_clip: 0.2,
            sil_buffer: 40_000,
            sil_exponent: 0.6,
            sil_transitions: 8000,
            sil_value_weight: 0.01,
        };
        match env {
            EnvKind::Ra => {}
            EnvKind::Poly => {
                c.advance_threshold = 0.90;
                c.bias = 5.0;
                c.prune = true;
                c.max_epochs = 750;
            }
            EnvKind::Aim => {
                c.bias = 5.0;
                c.prune = true;
                c.block_size = 0;
                c.warmup_episodes = 2_000_000;
                c.episodes_per_epoch = 10_000;
                c.batches_per_epoch = 500;
            }
        }
        c
    }

    /// Defaults for `env` overridden by the keys in `text`.
    pub fn parse(env: EnvKind, text: &str) -> Result<Self> {
        let overrides: toml::Table = text.parse().map_err(|e| Error::Config(format!("{e}")))?;
        let mut base = toml::Table::try_from(Self::for_env(env)).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(v) = overrides.get("env") {
            if v.as_str() != Some(env.name()) {
                return Err(Error::Config(format!("config is for env {v}, not {env}")));
            }
        }
        base.extend(overrides);
        let c: TrainConfig = base.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(env: EnvKind, path: &std::path::Path) -> Result<Self> {
        Self::parse(env, &std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.k == 0 {
            return bad("k must be positive");
        }
        if self.step_limit == 0 {
            return bad("step_limit must be positive");
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return bad("noise must lie in [0, 1]");
        }
        if !(self.bias > 0.0) {
            return bad("bias must be positive");
        }
        if !(0.0..=1.0).contains(&self.advance_threshold) {
            return bad("advance_threshold must lie in [0, 1]");
        }
        if self.n == 0 || self.hidden == 0 {
            return bad("network sizes must be positive");
        }
        if !(self.lr > 0.0 && self.ppo_lr > 0.0) {
            return bad("learning rates must be positive");
        }
        Ok(())
    }
}
