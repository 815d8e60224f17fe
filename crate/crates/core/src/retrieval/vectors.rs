use std::collections::HashMap;

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};

/// Word-vector table read from the plain text format: one word per line,
/// followed by its whitespace-separated components. A leading
/// `<count> <dim>` header line is accepted and skipped.
#[derive(Clone, Debug, PartialEq)]
pub struct WordVectors {
    index: HashMap<String, usize>,
    words: Vec<String>,
    vectors: Array2<f64>,
}

impl WordVectors {
    pub fn new(words: Vec<String>, vectors: Array2<f64>) -> Result<Self> {
        if words.len() != vectors.nrows() {
            return Err(Error::Invalid(format!(
                "{} words for {} vectors",
                words.len(),
                vectors.nrows()
            )));
        }
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Ok(WordVectors {
            index,
            words,
            vectors,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut words = Vec::new();
        let mut values = Vec::new();
        let mut dim = None;
        for (lineno, line) in text.lines().enumerate() {
            let mut fields = line.split_whitespace();
            let Some(word) = fields.next() else { continue };
            let comps: Vec<&str> = fields.collect();
            if lineno == 0 && comps.len() == 1 && word.parse::<usize>().is_ok() && comps[0].parse::<usize>().is_ok() {
                continue;
            }
            if comps.is_empty() {
                return Err(Error::parse(lineno + 1, format!("word `{word}` has no components")));
            }
            match dim {
                None => dim = Some(comps.len()),
                Some(d) if d != comps.len() => {
                    return Err(Error::parse(
                        lineno + 1,
                        format!("expected {d} components, found {}", comps.len()),
                    ))
                }
                _ => {}
            }
            for c in comps {
                values.push(c.parse::<f64>().map_err(|e| Error::parse(lineno + 1, format!("`{c}`: {e}")))?);
            }
            words.push(word.to_owned());
        }
        let dim = dim.unwrap_or(0);
        let vectors = Array2::from_shape_vec((words.len(), dim), values).expect("row widths checked");
        WordVectors::new(words, vectors)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (w, row) in self.words.iter().zip(self.vectors.rows()) {
            out.push_str(w);
            for v in row {
                out.push(' ');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Row of `word`, falling back to its lowercase form.
    pub fn row_of(&self, word: &str) -> Option<usize> {
        self.index
            .get(word)
            .or_else(|| self.index.get(&word.to_lowercase()))
            .copied()
    }

    pub fn get(&self, word: &str) -> Option<ArrayView1<'_, f64>> {
        self.row_of(word).map(|r| self.vectors.row(r))
    }

    pub fn row(&self, r: usize) -> ArrayView1<'_, f64> {
        self.vectors.row(r)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_with_header_and_lookup() {
        let v = WordVectors::parse("2 3\nthe 0.1 0.2 0.3\ncat -1 0 1e-2\n").unwrap();
        assert_eq!((v.len(), v.dim()), (2, 3));
        assert_eq!(v.get("Cat").unwrap().to_vec(), vec![-1.0, 0.0, 0.01]);
        assert!(v.get("dog").is_none());
        let again = WordVectors::parse(&v.to_text()).unwrap();
        assert_eq!(again, v);
    }

    #[test]
    fn ragged_vectors_fail() {
        assert!(WordVectors::parse("a 1 2\nb 1\n").is_err());
        assert!(WordVectors::parse("a x\n").is_err());
    }
}
