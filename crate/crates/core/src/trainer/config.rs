use std::fmt::Write as _;

use crate::amn::MergeStrategy;
use crate::error::{Error, Result};
use crate::model::{parse_value, ModelConfig};
use crate::retrieval::{DistanceMethod, DEFAULT_SIF_A};

/// Training run settings. Serialized as flat `key=value` lines.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub method: DistanceMethod,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Evaluate every this many epochs (the last epoch is always evaluated).
    pub eval_every: usize,
    /// Stop after this many evaluations without dev improvement; 0 disables.
    pub patience: usize,
    /// Global gradient-norm clip; `None` disables clipping.
    pub clip: Option<f64>,
    pub min_freq: usize,
    pub sif_a: f64,
    /// Also score the training set at every evaluation.
    pub eval_train: bool,
    /// Stop as soon as training F1 reaches this value.
    pub target_train_f1: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelConfig::default(),
            method: DistanceMethod::Ed,
            max_epochs: 20,
            batch_size: 32,
            seed: 1,
            eval_every: 1,
            patience: 5,
            clip: None,
            min_freq: 1,
            sif_a: DEFAULT_SIF_A,
            eval_train: false,
            target_train_f1: None,
        }
    }
}

fn optional<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "none".to_owned(), T::to_string)
}

impl TrainConfig {
    /// Base tagger without memory.
    pub fn base(mut self) -> Self {
        self.model.merge = None;
        self
    }

    pub fn with_merge(mut self, merge: MergeStrategy) -> Self {
        self.model.merge = Some(merge);
        self
    }

    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let mut out = self.model.entries();
        out.extend([
            ("method", self.method.to_string()),
            ("max_epochs", self.max_epochs.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("seed", self.seed.to_string()),
            ("eval_every", self.eval_every.to_string()),
            ("patience", self.patience.to_string()),
            ("clip", optional(&self.clip)),
            ("min_freq", self.min_freq.to_string()),
            ("sif_a", self.sif_a.to_string()),
            ("eval_train", self.eval_train.to_string()),
            ("target_train_f1", optional(&self.target_train_f1)),
        ]);
        out
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if self.model.set(key, value)? {
            return Ok(());
        }
        let opt_f64 = |v: &str| -> Result<Option<f64>> {
            match v.trim() {
                "none" => Ok(None),
                other => parse_value(key, other).map(Some),
            }
        };
        match key {
            "method" => self.method = value.parse()?,
            "max_epochs" => self.max_epochs = parse_value(key, value)?,
            "batch_size" => self.batch_size = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "eval_every" => self.eval_every = parse_value(key, value)?,
            "patience" => self.patience = parse_value(key, value)?,
            "clip" => self.clip = opt_f64(value)?,
            "min_freq" => self.min_freq = parse_value(key, value)?,
            "sif_a" => self.sif_a = parse_value(key, value)?,
            "eval_train" => self.eval_train = parse_value(key, value)?,
            "target_train_f1" => self.target_train_f1 = opt_f64(value)?,
            _ => return Err(Error::Config(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Apply `key=value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value, found `{line}`", i + 1)))?;
            self.set(k.trim(), v.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut c = TrainConfig::default();
        c.apply_text(text)?;
        Ok(c)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.max_epochs == 0 || self.batch_size == 0 || self.eval_every == 0 {
            return Err(Error::Config("max_epochs, batch_size and eval_every must be positive".into()));
        }
        if matches!(self.clip, Some(c) if c.is_nan() || c <= 0.0) {
            return Err(Error::Config("clip must be positive".into()));
        }
        if self.min_freq == 0 {
            return Err(Error::Config("min_freq must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let c = TrainConfig {
            clip: Some(5.0),
            method: DistanceMethod::Rd { seed: 3 },
            target_train_f1: Some(0.99),
            ..TrainConfig::default()
        }
        .base();
        assert_eq!(TrainConfig::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn comments_and_errors() {
        let c = TrainConfig::parse("# settings\nd_e = 16 # small\n\nmerge=flat\n").unwrap();
        assert_eq!(c.model.hyper.d_e, 16);
        assert_eq!(c.model.merge, Some(MergeStrategy::Flat));
        assert!(TrainConfig::parse("nope=1").is_err());
        assert!(TrainConfig::parse("d_e").is_err());
        assert!(TrainConfig::parse("max_epochs=-1").is_err());
    }
}
