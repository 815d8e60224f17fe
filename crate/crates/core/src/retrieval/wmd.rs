//! Relaxed word mover's distance.
//!
//! Each one-sided relaxation drops one of the two flow constraints of the
//! transport problem, so every word simply ships all of its mass to the
//! nearest word of the other sentence. The maximum of both sides is a
//! lower bound of the exact distance.

use std::collections::BTreeMap;

use super::WordVectors;
use crate::corpus::Sentence;
use crate::error::{Error, Result};

/// Distance reported when a sentence has no word with a vector.
pub const NO_VECTORS_DISTANCE: f64 = 1e9;

/// Normalized bag of words: distinct vector rows with their mass.
#[derive(Clone, Debug, PartialEq)]
pub struct Nbow {
    pub rows: Vec<usize>,
    pub weights: Vec<f64>,
}

impl Nbow {
    pub fn new<'a>(words: impl IntoIterator<Item = &'a str>, vectors: &WordVectors) -> Self {
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for w in words {
            if let Some(r) = vectors.row_of(w) {
                *counts.entry(r).or_insert(0) += 1;
            }
        }
        let total: usize = counts.values().sum();
        Nbow {
            rows: counts.keys().copied().collect(),
            weights: counts.values().map(|&c| c as f64 / total as f64).collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

fn euclidean(vectors: &WordVectors, a: usize, b: usize) -> f64 {
    vectors
        .row(a)
        .iter()
        .zip(vectors.row(b))
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn one_sided(from: &Nbow, to: &Nbow, vectors: &WordVectors) -> f64 {
    from.rows
        .iter()
        .zip(&from.weights)
        .map(|(&r, &w)| {
            let nearest = to
                .rows
                .iter()
                .map(|&s| euclidean(vectors, r, s))
                .fold(f64::INFINITY, f64::min);
            w * nearest
        })
        .sum()
}

/// Relaxed WMD between two bags of words.
pub fn rwmd_nbow(a: &Nbow, b: &Nbow, vectors: &WordVectors) -> f64 {
    if a.is_empty() || b.is_empty() {
        return NO_VECTORS_DISTANCE;
    }
    one_sided(a, b, vectors).max(one_sided(b, a, vectors))
}

/// Relaxed WMD between the word forms of two sentences. Words without a
/// vector are dropped.
pub fn relaxed_wmd(a: &Sentence, b: &Sentence, vectors: &WordVectors) -> Result<f64> {
    if vectors.is_empty() {
        return Err(Error::Retrieval("relaxed WMD needs a non-empty word-vector table".into()));
    }
    let na = Nbow::new(a.forms(), vectors);
    let nb = Nbow::new(b.forms(), vectors);
    Ok(rwmd_nbow(&na, &nb, vectors))
}

#[cfg(test)]
mod tests {
    use ndarray::array;

    use super::*;
    use crate::corpus::Token;

    fn sentence(words: &[&str]) -> Sentence {
        Sentence {
            id: "s".into(),
            tokens: words.iter().map(|w| Token::new(w, w, "NN")).collect(),
        }
    }

    fn table() -> WordVectors {
        WordVectors::new(
            vec!["a".into(), "b".into(), "c".into()],
            array![[0.0, 0.0], [3.0, 4.0], [1.0, 0.0]],
        )
        .unwrap()
    }

    #[test]
    fn identical_sentences() {
        let s = sentence(&["a", "b", "c", "a"]);
        assert_eq!(relaxed_wmd(&s, &s, &table()).unwrap(), 0.0);
    }

    #[test]
    fn single_words_are_euclidean() {
        let d = relaxed_wmd(&sentence(&["a"]), &sentence(&["b"]), &table()).unwrap();
        assert_eq!(d, 5.0);
    }

    #[test]
    fn unknown_words_are_dropped() {
        let t = table();
        let d = relaxed_wmd(&sentence(&["a", "zzz"]), &sentence(&["b"]), &t).unwrap();
        assert_eq!(d, 5.0);
        let sentinel = relaxed_wmd(&sentence(&["zzz"]), &sentence(&["b"]), &t).unwrap();
        assert_eq!(sentinel, NO_VECTORS_DISTANCE);
    }

    #[test]
    fn empty_table_is_an_error() {
        let empty = WordVectors::new(vec![], ndarray::Array2::zeros((0, 2))).unwrap();
        assert!(relaxed_wmd(&sentence(&["a"]), &sentence(&["a"]), &empty).is_err());
    }

    #[test]
    fn asymmetric_sides_take_max() {
        // a,b -> c: a ships 0.5 * 1, b ships 0.5 * |(3,4)-(1,0)|.
        let t = table();
        let d = relaxed_wmd(&sentence(&["a", "b"]), &sentence(&["c"]), &t).unwrap();
        let expected = 0.5 * 1.0 + 0.5 * (4.0f64 + 16.0).sqrt();
        assert!((d - expected).abs() < 1e-12);
        let back = relaxed_wmd(&sentence(&["c"]), &sentence(&["a", "b"]), &t).unwrap();
        assert_eq!(d, back);
    }
}
