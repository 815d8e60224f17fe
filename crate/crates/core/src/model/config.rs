use std::fmt::Display;
use std::str::FromStr;

use crate::amn::MergeStrategy;
use crate::error::{Error, Result};

/// Model dimensions and rates. Defaults follow the reference settings.
#[derive(Clone, Debug, PartialEq)]
pub struct Hyperparams {
    /// Random word embedding.
    pub d_re: usize,
    /// Pretrained word embedding.
    pub d_pe: usize,
    pub d_pos: usize,
    pub d_le: usize,
    /// Projected contextual vector.
    pub d_ce: usize,
    /// Predicate flag.
    pub d_pred: usize,
    /// Argument (label) embedding.
    pub d_ae: usize,
    /// Memory size.
    pub m: usize,
    /// Layers of the tagging encoder.
    pub k_e: usize,
    /// Layers of the attention encoder.
    pub k_a: usize,
    /// Hidden size per direction of the tagging encoder.
    pub d_e: usize,
    /// Output width of the attention encoder (both directions together).
    pub d_a: usize,
    /// Dropout rate.
    pub r_d: f64,
    /// Learning rate.
    pub l_r: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            d_re: 100,
            d_pe: 100,
            d_pos: 32,
            d_le: 100,
            d_ce: 128,
            d_pred: 16,
            d_ae: 128,
            m: 4,
            k_e: 2,
            k_a: 3,
            d_e: 512,
            d_a: 512,
            r_d: 0.1,
            l_r: 0.001,
        }
    }
}

pub(crate) fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| Error::Config(format!("bad value `{value}` for `{key}`: {e}")))
}

impl Hyperparams {
    pub const KEYS: [&'static str; 14] = [
        "d_re", "d_pe", "d_pos", "d_le", "d_ce", "d_pred", "d_ae", "m", "k_e", "k_a", "d_e", "d_a", "r_d", "l_r",
    ];

    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("d_re", self.d_re.to_string()),
            ("d_pe", self.d_pe.to_string()),
            ("d_pos", self.d_pos.to_string()),
            ("d_le", self.d_le.to_string()),
            ("d_ce", self.d_ce.to_string()),
            ("d_pred", self.d_pred.to_string()),
            ("d_ae", self.d_ae.to_string()),
            ("m", self.m.to_string()),
            ("k_e", self.k_e.to_string()),
            ("k_a", self.k_a.to_string()),
            ("d_e", self.d_e.to_string()),
            ("d_a", self.d_a.to_string()),
            ("r_d", self.r_d.to_string()),
            ("l_r", self.l_r.to_string()),
        ]
    }

    /// Set one field by name. Returns `false` for keys this type does not own.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "d_re" => self.d_re = parse_value(key, value)?,
            "d_pe" => self.d_pe = parse_value(key, value)?,
            "d_pos" => self.d_pos = parse_value(key, value)?,
            "d_le" => self.d_le = parse_value(key, value)?,
            "d_ce" => self.d_ce = parse_value(key, value)?,
            "d_pred" => self.d_pred = parse_value(key, value)?,
            "d_ae" => self.d_ae = parse_value(key, value)?,
            "m" => self.m = parse_value(key, value)?,
            "k_e" => self.k_e = parse_value(key, value)?,
            "k_a" => self.k_a = parse_value(key, value)?,
            "d_e" => self.d_e = parse_value(key, value)?,
            "d_a" => self.d_a = parse_value(key, value)?,
            "r_d" => self.r_d = parse_value(key, value)?,
            "l_r" => self.l_r = parse_value(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// Width of the per-token word representation.
    pub fn d_word(&self, contextual: bool) -> usize {
        let ce = if contextual { self.d_ce } else { 0 };
        self.d_re + self.d_pe + self.d_pos + self.d_le + ce + self.d_pred
    }
}

/// Everything needed to rebuild a model's parameter layout.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub hyper: Hyperparams,
    /// `None` is the base tagger without memory.
    pub merge: Option<MergeStrategy>,
    /// Update the pretrained word table during training.
    pub tune_pretrained: bool,
    /// Width of the precomputed contextual vectors; 0 disables the column.
    pub ctx_width: usize,
    /// Mark the predicate of each associated sentence with the flag embedding.
    pub memory_flag: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hyper: Hyperparams::default(),
            merge: Some(MergeStrategy::Average),
            tune_pretrained: false,
            ctx_width: 0,
            memory_flag: true,
        }
    }
}

impl ModelConfig {
    pub fn contextual(&self) -> bool {
        self.hyper.d_ce > 0 && self.ctx_width > 0
    }

    pub fn d_word(&self) -> usize {
        self.hyper.d_word(self.contextual())
    }

    /// Memory entries per instance; 0 for the base tagger.
    pub fn memory_size(&self) -> usize {
        if self.merge.is_some() {
            self.hyper.m
        } else {
            0
        }
    }

    /// Width of the encoder input: word representation plus merged
    /// attention embedding.
    pub fn encoder_input(&self) -> usize {
        let h = &self.hyper;
        self.d_word() + self.merge.map_or(0, |s| s.output_dim(h.m, h.d_ae))
    }

    pub fn validate(&self) -> Result<()> {
        let h = &self.hyper;
        let fail = |msg: &str| Err(Error::Config(msg.to_owned()));
        if self.d_word() == 0 {
            return fail("all embedding widths are zero");
        }
        if h.d_e == 0 || h.k_e == 0 {
            return fail("d_e and k_e must be positive");
        }
        if !(0.0..1.0).contains(&h.r_d) {
            return fail("r_d must lie in [0, 1)");
        }
        if !(h.l_r > 0.0 && h.l_r.is_finite()) {
            return fail("l_r must be positive");
        }
        if self.merge.is_some() {
            if h.m == 0 || h.d_ae == 0 || h.k_a == 0 {
                return fail("m, d_ae and k_a must be positive with memory enabled");
            }
            if h.d_a == 0 || !h.d_a.is_multiple_of(2) {
                return fail("d_a must be a positive even number");
            }
        }
        Ok(())
    }

    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let mut out = self.hyper.entries();
        out.push(("merge", self.merge.map_or_else(|| "none".to_owned(), |s| s.to_string())));
        out.push(("tune_pretrained", self.tune_pretrained.to_string()));
        out.push(("ctx_width", self.ctx_width.to_string()));
        out.push(("memory_flag", self.memory_flag.to_string()));
        out
    }

    /// Set one field by name. Returns `false` for keys this type does not own.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        if self.hyper.set(key, value)? {
            return Ok(true);
        }
        match key {
            "merge" => {
                self.merge = match value.trim() {
                    "none" | "base" => None,
                    other => Some(other.parse()?),
                }
            }
            "tune_pretrained" => self.tune_pretrained = parse_value(key, value)?,
            "ctx_width" => self.ctx_width = parse_value(key, value)?,
            "memory_flag" => self.memory_flag = parse_value(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}
