use std::collections::HashMap;
use std::fmt::Write as _;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Precomputed per-token vectors keyed by sentence id.
///
/// Text format: a `width <d>` header, then for every sentence a
/// `sentence <id>` line followed by one line of `d` decimals per token.
#[derive(Clone, Debug, PartialEq)]
pub struct ContextVectors {
    width: usize,
    sentences: HashMap<String, Tensor>,
}

impl ContextVectors {
    pub fn new(width: usize) -> Self {
        ContextVectors {
            width,
            sentences: HashMap::new(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn get(&self, sentence_id: &str) -> Option<&Tensor> {
        self.sentences.get(sentence_id)
    }

    pub fn insert(&mut self, sentence_id: impl Into<String>, vectors: Tensor) -> Result<()> {
        if vectors.ncols() != self.width {
            return Err(Error::Shape {
                op: "context vectors",
                left: [vectors.nrows(), vectors.ncols()],
                right: [vectors.nrows(), self.width],
            });
        }
        self.sentences.insert(sentence_id.into(), vectors);
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let width = match lines.next() {
            Some((i, line)) => match line.split_whitespace().collect::<Vec<_>>().as_slice() {
                ["width", w] => w
                    .parse::<usize>()
                    .map_err(|_| Error::parse(i + 1, format!("bad width `{w}`")))?,
                _ => return Err(Error::parse(i + 1, "expected `width <d>` header")),
            },
            None => return Err(Error::parse(1, "empty context-vector file")),
        };
        let mut out = ContextVectors::new(width);
        let mut current: Option<(String, Vec<f64>)> = None;
        let finish = |cur: Option<(String, Vec<f64>)>, out: &mut ContextVectors| {
            if let Some((id, values)) = cur {
                let rows = values.len() / width.max(1);
                let m = Array2::from_shape_vec((rows, width), values).expect("row widths checked");
                out.sentences.insert(id, m);
            }
        };
        for (i, line) in lines {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.first() == Some(&"sentence") {
                if fields.len() != 2 {
                    return Err(Error::parse(i + 1, "expected `sentence <id>`"));
                }
                finish(current.take(), &mut out);
                current = Some((fields[1].to_owned(), Vec::new()));
                continue;
            }
            let Some((_, values)) = current.as_mut() else {
                return Err(Error::parse(i + 1, "vector row before any `sentence` line"));
            };
            if fields.len() != width {
                return Err(Error::parse(i + 1, format!("expected {width} values, found {}", fields.len())));
            }
            for f in fields {
                values.push(f.parse::<f64>().map_err(|_| Error::parse(i + 1, format!("bad number `{f}`")))?);
            }
        }
        finish(current, &mut out);
        Ok(out)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("width {}\n", self.width);
        let mut ids: Vec<&String> = self.sentences.keys().collect();
        ids.sort();
        for id in ids {
            let _ = writeln!(out, "sentence {id}");
            for row in self.sentences[id].rows() {
                let line: Vec<String> = row.iter().map(f64::to_string).collect();
                let _ = writeln!(out, "{}", line.join(" "));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use ndarray::array;

    use super::*;

    #[test]
    fn round_trip() {
        let mut c = ContextVectors::new(2);
        c.insert("s1", array![[0.5, -1.0], [2.0, 0.0]]).unwrap();
        c.insert("s2", array![[1e-3, 4.0]]).unwrap();
        let back = ContextVectors::parse(&c.to_text()).unwrap();
        assert_eq!(back, c);
        assert!(c.insert("s3", array![[1.0]]).is_err());
    }

    #[test]
    fn malformed_files() {
        assert!(ContextVectors::parse("").is_err());
        assert!(ContextVectors::parse("width 2\n1 2\n").is_err());
        assert!(ContextVectors::parse("width 2\nsentence a\n1 2 3\n").is_err());
    }
}
