//! Run configuration as line-oriented `dotted.key = value` text.
//!
//! `#` starts a comment. Every key has a default, unknown keys are fatal and
//! [`PfConfig::to_text`] writes every key, so a rendered config parses back to
//! an identical value.

use std::path::Path;
use std::str::FromStr;

use crate::dataio::TransformMode;
use crate::error::{Error, Result};
use crate::model::{EmbeddingMode, ModelConfig};
use crate::sampler::OversamplePolicy;
use crate::tensor::Activation;
use crate::training::{LambdaSchedule, TrainConfig};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplerConfig {
    pub enabled: bool,
    /// Mixture components fitted to the training target.
    pub components: usize,
    pub policy: OversamplePolicy,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            enabled: true,
            components: 3,
            policy: OversamplePolicy::default(),
            max_iter: 200,
            tol: 1e-6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DataConfig {
    pub transform: TransformMode,
    /// Share of the pre-test range used for validation.
    pub val_fraction: f64,
    pub test_fraction: f64,
    /// Spacing of training window origins.
    pub stride: usize,
    /// Keep only windows issued September through May.
    pub season_mask: bool,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            transform: TransformMode::Log1pStandardize,
            val_fraction: 0.1,
            test_fraction: 0.2,
            stride: 16,
            season_mask: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalConfig {
    /// Grid steps between rolling issuances.
    pub issue_every: usize,
    /// Leading steps scored by the short-range metric.
    pub short_steps: usize,
    pub single_shot: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            issue_every: 16,
            short_steps: 16,
            single_shot: false,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PfConfig {
    pub seed: u64,
    pub model: ModelConfig,
    pub sampler: SamplerConfig,
    pub train: TrainConfig,
    pub data: DataConfig,
    pub eval: EvalConfig,
}

trait ConfigValue: Sized {
    fn parse_value(s: &str) -> std::result::Result<Self, String>;
    fn render(&self) -> String;
}

macro_rules! via_from_str {
    ($($t:ty),*) => {$(
        impl ConfigValue for $t {
            fn parse_value(s: &str) -> std::result::Result<Self, String> {
                <$t as FromStr>::from_str(s).map_err(|e| e.to_string())
            }
            fn render(&self) -> String {
                ToString::to_string(self)
            }
        }
    )*};
}

via_from_str!(usize, u64, f64, bool, EmbeddingMode, LambdaSchedule);

impl ConfigValue for Activation {
    fn parse_value(s: &str) -> std::result::Result<Self, String> {
        s.parse::<Activation>().map_err(|e| e.to_string())
    }
    fn render(&self) -> String {
        self.name().to_string()
    }
}

impl ConfigValue for TransformMode {
    fn parse_value(s: &str) -> std::result::Result<Self, String> {
        s.parse::<TransformMode>().map_err(|e| e.to_string())
    }
    fn render(&self) -> String {
        self.name().to_string()
    }
}

macro_rules! registry {
    ($($key:literal => $($field:ident).+;)*) => {
        /// Every accepted key, in rendering order.
        pub const KEYS: &[&str] = &[$($key),*];

        impl PfConfig {
            /// Sets one key from its textual value.
            pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
                match key {
                    $($key => {
                        self.$($field).+ = ConfigValue::parse_value(value)
                            .map_err(|e| Error::Config(format!("{key} = {value:?}: {e}")))?;
                    })*
                    _ => return Err(unknown_key(key)),
                }
                Ok(())
            }

            pub fn get(&self, key: &str) -> Option<String> {
                match key {
                    $($key => Some(self.$($field).+.render()),)*
                    _ => None,
                }
            }
        }
    };
}

registry! {
    "seed" => seed;
    "model.d_model" => model.d_model;
    "model.n_heads" => model.n_heads;
    "model.n_enc_layers" => model.n_enc_layers;
    "model.n_dec_layers" => model.n_dec_layers;
    "model.ffn_width" => model.ffn_width;
    "model.t" => model.t;
    "model.h" => model.h;
    "model.m" => model.m;
    "model.embedding_mode" => model.embedding_mode;
    "model.dropout" => model.dropout;
    "efe.s" => model.efe.s;
    "efe.activation" => model.efe.activation;
    "efe.target_lags" => model.efe.include_target_lags;
    "aee.hidden" => model.aee.hidden;
    "aee.layers" => model.aee.layers;
    "sampler.enabled" => sampler.enabled;
    "sampler.components" => sampler.components;
    "sampler.eta" => sampler.policy.eta;
    "sampler.s" => sampler.policy.s_step;
    "sampler.nu" => sampler.policy.nu;
    "sampler.os_pct" => sampler.policy.os_pct;
    "sampler.max_iter" => sampler.max_iter;
    "sampler.tol" => sampler.tol;
    "train.lr" => train.lr;
    "train.lr_decay" => train.lr_decay;
    "train.max_epochs" => train.max_epochs;
    "train.patience" => train.patience;
    "train.batch_size" => train.batch_size;
    "train.alpha" => train.alpha;
    "train.beta" => train.beta;
    "train.s_short" => train.s_short;
    "loss.schedule" => train.schedule;
    "data.transform" => data.transform;
    "data.val_fraction" => data.val_fraction;
    "data.test_fraction" => data.test_fraction;
    "data.stride" => data.stride;
    "data.season_mask" => data.season_mask;
    "eval.issue_every" => eval.issue_every;
    "eval.short_steps" => eval.short_steps;
    "eval.single_shot" => eval.single_shot;
}

fn unknown_key(key: &str) -> Error {
    Error::Config(format!(
        "unknown key {key:?}; valid keys are: {}",
        KEYS.join(", ")
    ))
}

impl PfConfig {
    /// Applies `key = value` lines on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`, got {raw:?}", n + 1))
            })?;
            self.set(key.trim(), value.trim())
                .map_err(|e| match e {
                    Error::Config(msg) => Error::Config(format!("line {}: {msg}", n + 1)),
                    other => other,
                })?;
        }
        Ok(())
    }

    /// Defaults overridden by `text`, then validated.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = PfConfig::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Every key with its current value, one per line.
    pub fn to_text(&self) -> String {
        KEYS.iter()
            .map(|k| format!("{k} = {}\n", self.get(k).unwrap_or_default()))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate(self.model.h)?;
        self.sampler.policy.validate()?;
        if self.sampler.components == 0 {
            return Err(Error::Config("sampler.components must be at least 1".into()));
        }
        let d = &self.data;
        let frac_ok = |f: f64| f > 0.0 && f < 1.0;
        if !frac_ok(d.val_fraction) || !frac_ok(d.test_fraction) {
            return Err(Error::Config(
                "data.val_fraction and data.test_fraction must be in (0, 1)".into(),
            ));
        }
        if d.stride == 0 || self.eval.issue_every == 0 {
            return Err(Error::Config("data.stride and eval.issue_every must be positive".into()));
        }
        if self.eval.short_steps == 0 || self.eval.short_steps > self.model.h {
            return Err(Error::Config(format!(
                "eval.short_steps must be in 1..={}",
                self.model.h
            )));
        }
        Ok(())
    }
}
