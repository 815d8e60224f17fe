//! Plain-text checkpoints. The layout is rebuilt from the stored config
//! and vocabularies, then every parameter is overwritten by name, so a
//! checkpoint is byte-identical for identical parameters.

use std::fmt::Write as _;

use ndarray::Array2;

use super::{ModelConfig, SrlModel};
use crate::corpus::{Vocab, Vocabs};
use crate::error::{Error, Result};

const HEADER: &str = "# amn-srl checkpoint v1";

fn ckpt(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

impl SrlModel {
    pub fn to_checkpoint(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{HEADER}");
        let _ = writeln!(out, "[config]");
        for (k, v) in self.config.entries() {
            let _ = writeln!(out, "{k}={v}");
        }
        for (name, vocab) in [
            ("word", &self.vocabs.word),
            ("lemma", &self.vocabs.lemma),
            ("pos", &self.vocabs.pos),
            ("role", &self.vocabs.role),
        ] {
            let _ = writeln!(out, "[vocab {name} {}]", vocab.len());
            for item in vocab.items() {
                let _ = writeln!(out, "{item}");
            }
        }
        for (_, p) in self.store.iter() {
            let (rows, cols) = p.value.dim();
            let _ = writeln!(out, "[param {} {rows} {cols} {}]", p.name, p.trainable);
            for row in p.value.rows() {
                let mut first = true;
                for v in row {
                    if !first {
                        out.push(' ');
                    }
                    first = false;
                    let _ = write!(out, "{v}");
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(HEADER) {
            return Err(ckpt(format!("missing `{HEADER}` header")));
        }
        if lines.next() != Some("[config]") {
            return Err(ckpt("expected [config] section"));
        }
        let mut config = ModelConfig::default();
        let mut pending = None;
        for line in lines.by_ref() {
            if line.starts_with('[') {
                pending = Some(line);
                break;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ckpt(format!("bad config line `{line}`")))?;
            if !config.set(k, v)? {
                return Err(ckpt(format!("unknown config key `{k}`")));
            }
        }

        let mut vocabs: [Option<Vocab>; 4] = Default::default();
        for (slot, expected) in vocabs.iter_mut().zip(["word", "lemma", "pos", "role"]) {
            let head = pending.take().or_else(|| lines.next()).ok_or_else(|| ckpt("truncated vocabularies"))?;
            let inner = head
                .strip_prefix("[vocab ")
                .and_then(|s| s.strip_suffix(']'))
                .ok_or_else(|| ckpt(format!("expected vocabulary section, found `{head}`")))?;
            let (name, count) = inner.split_once(' ').ok_or_else(|| ckpt("bad vocabulary header"))?;
            if name != expected {
                return Err(ckpt(format!("expected vocabulary `{expected}`, found `{name}`")));
            }
            let count: usize = count.parse().map_err(|_| ckpt("bad vocabulary size"))?;
            let items: Vec<String> = lines.by_ref().take(count).map(str::to_owned).collect();
            if items.len() != count {
                return Err(ckpt(format!("vocabulary `{name}` is truncated")));
            }
            *slot = Some(Vocab::from_items(items)?);
        }
        let [word, lemma, pos, role] = vocabs.map(|v| v.expect("all four read"));
        let vocabs = Vocabs { word, lemma, pos, role };

        let mut model = SrlModel::new(config, vocabs, None, 0)?;
        let mut seen = vec![false; model.store.len()];
        while let Some(head) = lines.next() {
            if head.is_empty() {
                continue;
            }
            let fields: Vec<&str> = head
                .strip_prefix("[param ")
                .and_then(|s| s.strip_suffix(']'))
                .ok_or_else(|| ckpt(format!("expected parameter section, found `{head}`")))?
                .split(' ')
                .collect();
            let [name, rows, cols, trainable] = fields[..] else {
                return Err(ckpt(format!("bad parameter header `{head}`")));
            };
            let id = model
                .store
                .id(name)
                .ok_or_else(|| ckpt(format!("parameter `{name}` does not belong to this model")))?;
            let rows: usize = rows.parse().map_err(|_| ckpt("bad row count"))?;
            let cols: usize = cols.parse().map_err(|_| ckpt("bad column count"))?;
            let trainable: bool = trainable.parse().map_err(|_| ckpt("bad trainable flag"))?;
            if model.store.get(id).dim() != (rows, cols) || model.store.param(id).trainable != trainable {
                return Err(ckpt(format!("parameter `{name}` does not match the configured layout")));
            }
            let mut values = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let line = lines.next().ok_or_else(|| ckpt(format!("parameter `{name}` is truncated")))?;
                let before = values.len();
                for f in line.split(' ').filter(|f| !f.is_empty()) {
                    values.push(f.parse::<f64>().map_err(|_| ckpt(format!("bad number `{f}` in `{name}`")))?);
                }
                if values.len() - before != cols {
                    return Err(ckpt(format!("row of `{name}` has the wrong width")));
                }
            }
            *model.store.get_mut(id) = Array2::from_shape_vec((rows, cols), values).expect("sizes checked");
            seen[id.index()] = true;
        }
        if let Some(missing) = model.store.iter().find(|(id, _)| !seen[id.index()]) {
            return Err(ckpt(format!("parameter `{}` is missing", missing.1.name)));
        }
        Ok(model)
    }
}
