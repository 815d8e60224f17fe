//! Smooth inverse frequency sentence vectors with common-component
//! removal.

use std::collections::HashMap;

use nalgebra::DMatrix;
use ndarray::{Array1, Array2};

use super::WordVectors;
use crate::corpus::Sentence;
use crate::error::{Error, Result};

/// Default smoothing parameter `a`.
pub const DEFAULT_SIF_A: f64 = 1e-3;

/// Unigram probabilities of word forms.
pub fn unigram_probabilities(corpus: &[Sentence]) -> HashMap<String, f64> {
    let mut counts: HashMap<String, usize> = HashMap::new();
    let mut total = 0usize;
    for form in corpus.iter().flat_map(|s| s.forms()) {
        *counts.entry(form.to_owned()).or_insert(0) += 1;
        total += 1;
    }
    counts
        .into_iter()
        .map(|(w, c)| (w, c as f64 / total.max(1) as f64))
        .collect()
}

/// SIF weighting fitted on a corpus: word probabilities, the smoothing
/// parameter and the common direction removed from every vector.
#[derive(Clone, Debug, PartialEq)]
pub struct SifModel {
    a: f64,
    probabilities: HashMap<String, f64>,
    /// Unit first right-singular direction of the fitted corpus matrix,
    /// absent when that matrix is all zeros.
    component: Option<Array1<f64>>,
}

impl SifModel {
    /// Fit the common component on `corpus`.
    pub fn fit(
        corpus: &[Sentence],
        vectors: &WordVectors,
        probabilities: HashMap<String, f64>,
        a: f64,
    ) -> Result<Self> {
        if a <= 0.0 || !a.is_finite() {
            return Err(Error::Config(format!("SIF parameter a must be positive, got {a}")));
        }
        let mut model = SifModel {
            a,
            probabilities,
            component: None,
        };
        let raw = model.weighted_matrix(corpus, vectors);
        model.component = first_right_singular(&raw);
        Ok(model)
    }

    pub fn component(&self) -> Option<&Array1<f64>> {
        self.component.as_ref()
    }

    fn weight(&self, word: &str) -> f64 {
        let p = self.probabilities.get(word).copied().unwrap_or(0.0);
        self.a / (self.a + p)
    }

    /// Frequency-weighted average of the in-vocabulary word vectors.
    pub fn weighted_average(&self, sentence: &Sentence, vectors: &WordVectors) -> Array1<f64> {
        let mut acc = Array1::zeros(vectors.dim());
        let mut n = 0usize;
        for form in sentence.forms() {
            if let Some(v) = vectors.get(form) {
                acc.scaled_add(self.weight(form), &v);
                n += 1;
            }
        }
        if n == 0 {
            log::warn!("sentence {} has no word with a vector; using the zero vector", sentence.id);
            return acc;
        }
        acc / n as f64
    }

    fn weighted_matrix(&self, corpus: &[Sentence], vectors: &WordVectors) -> Array2<f64> {
        let mut m = Array2::zeros((corpus.len(), vectors.dim()));
        for (i, s) in corpus.iter().enumerate() {
            m.row_mut(i).assign(&self.weighted_average(s, vectors));
        }
        m
    }

    /// SIF vector of one sentence with the fitted component removed.
    pub fn embed(&self, sentence: &Sentence, vectors: &WordVectors) -> Array1<f64> {
        let mut v = self.weighted_average(sentence, vectors);
        if let Some(u) = &self.component {
            let proj = v.dot(u);
            v.scaled_add(-proj, u);
        }
        v
    }
}

fn first_right_singular(m: &Array2<f64>) -> Option<Array1<f64>> {
    let d = m.ncols();
    if d == 0 || m.iter().all(|&v| v == 0.0) {
        return None;
    }
    let gram = m.t().dot(m);
    let sym = DMatrix::from_fn(d, d, |i, j| gram[[i, j]]);
    let eig = sym.symmetric_eigen();
    let top = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold(0, |best, (i, &v)| if v > eig.eigenvalues[best] { i } else { best });
    let col = eig.eigenvectors.column(top);
    let mut u = Array1::from_iter(col.iter().copied());
    let norm = u.dot(&u).sqrt();
    u /= norm;
    // Fix the sign so results do not depend on the eigen solver.
    if let Some(first) = u.iter().find(|v| v.abs() > 1e-12) {
        if *first < 0.0 {
            u.mapv_inplace(|v| -v);
        }
    }
    Some(u)
}

/// SIF vectors of every sentence of `corpus`, with the first singular
/// direction of the stacked matrix removed. Rows follow corpus order.
pub fn sif_embed(
    corpus: &[Sentence],
    vectors: &WordVectors,
    probabilities: HashMap<String, f64>,
    a: f64,
) -> Result<Array2<f64>> {
    let model = SifModel::fit(corpus, vectors, probabilities, a)?;
    let mut out = Array2::zeros((corpus.len(), vectors.dim()));
    for (i, s) in corpus.iter().enumerate() {
        out.row_mut(i).assign(&model.embed(s, vectors));
    }
    Ok(out)
}
