//! Sentence distances and top-m associated-sentence selection.
//!
//! Distances compare whole sentences, so two predicate instances of the
//! same sentence are at distance zero under ED, WMD and SD. What a query
//! retrieves is a training *instance*: its sentence plus the gold label
//! row of its own predicate.

mod edit;
mod index;
mod sif;
mod vectors;
mod wmd;

use std::fmt;
use std::str::FromStr;

use ndarray::Array1;

pub use edit::pos_edit_distance;
pub use index::{build_index, MemoryEntry, Neighbor, NeighborIndex};
pub use sif::{sif_embed, unigram_probabilities, SifModel, DEFAULT_SIF_A};
pub use vectors::WordVectors;
pub use wmd::{relaxed_wmd, rwmd_nbow, Nbow, NO_VECTORS_DISTANCE};

use crate::corpus::{PredicateInstance, Sentence};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DistanceMethod {
    /// Edit distance between predicted POS sequences.
    Ed,
    /// Relaxed word mover's distance.
    Wmd,
    /// Euclidean distance between SIF vectors.
    Sd,
    /// Seeded pseudo-random distance.
    Rd { seed: u64 },
}

impl fmt::Display for DistanceMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistanceMethod::Ed => f.write_str("ed"),
            DistanceMethod::Wmd => f.write_str("wmd"),
            DistanceMethod::Sd => f.write_str("sd"),
            DistanceMethod::Rd { seed } => write!(f, "rd:{seed}"),
        }
    }
}

impl FromStr for DistanceMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "ed" => Ok(DistanceMethod::Ed),
            "wmd" => Ok(DistanceMethod::Wmd),
            "sd" => Ok(DistanceMethod::Sd),
            "rd" => Ok(DistanceMethod::Rd { seed: 0 }),
            other => match other.strip_prefix("rd:") {
                Some(seed) => seed
                    .parse()
                    .map(|seed| DistanceMethod::Rd { seed })
                    .map_err(|_| Error::Config(format!("bad random-distance seed `{seed}`"))),
                None => Err(Error::Config(format!(
                    "unknown distance method `{s}` (expected ed, wmd, sd or rd[:seed])"
                ))),
            },
        }
    }
}

/// Word vectors and the fitted SIF model, loaded as needed per method.
#[derive(Clone, Debug, Default)]
pub struct DistanceResources {
    pub vectors: Option<WordVectors>,
    pub sif: Option<SifModel>,
}

impl DistanceResources {
    /// Resources for `method` over a training corpus. `vectors` is required
    /// for WMD and SD.
    pub fn prepare(
        method: DistanceMethod,
        train: &[Sentence],
        vectors: Option<WordVectors>,
        sif_a: f64,
    ) -> Result<Self> {
        match method {
            DistanceMethod::Ed | DistanceMethod::Rd { .. } => Ok(DistanceResources {
                vectors,
                sif: None,
            }),
            DistanceMethod::Wmd | DistanceMethod::Sd => {
                let vectors = vectors.ok_or_else(|| {
                    Error::Retrieval(format!("method {method} needs a word-vector file"))
                })?;
                if vectors.is_empty() {
                    return Err(Error::Retrieval("word-vector table is empty".into()));
                }
                let sif = if method == DistanceMethod::Sd {
                    Some(SifModel::fit(train, &vectors, unigram_probabilities(train), sif_a)?)
                } else {
                    None
                };
                Ok(DistanceResources {
                    vectors: Some(vectors),
                    sif,
                })
            }
        }
    }

    fn vectors(&self, method: DistanceMethod) -> Result<&WordVectors> {
        self.vectors
            .as_ref()
            .ok_or_else(|| Error::Retrieval(format!("method {method} needs word vectors")))
    }
}

/// Per-sentence precomputation for a distance method.
#[derive(Clone, Debug, PartialEq)]
pub enum SentenceFeatures {
    Pos(Vec<String>),
    Bow(Nbow),
    Sif(Array1<f64>),
    Key(String),
}

pub fn sentence_features(
    method: DistanceMethod,
    sentence: &Sentence,
    resources: &DistanceResources,
) -> Result<SentenceFeatures> {
    Ok(match method {
        DistanceMethod::Ed => {
            SentenceFeatures::Pos(sentence.tokens.iter().map(|t| t.pos.clone()).collect())
        }
        DistanceMethod::Wmd => {
            SentenceFeatures::Bow(Nbow::new(sentence.forms(), resources.vectors(method)?))
        }
        DistanceMethod::Sd => {
            let sif = resources
                .sif
                .as_ref()
                .ok_or_else(|| Error::Retrieval("method sd needs a fitted SIF model".into()))?;
            SentenceFeatures::Sif(sif.embed(sentence, resources.vectors(method)?))
        }
        DistanceMethod::Rd { .. } => SentenceFeatures::Key(sentence.id.clone()),
    })
}

fn fnv1a(bytes: &[u8], mut h: u64) -> u64 {
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Symmetric pseudo-random value in `[0, 1)` determined by the seed and
/// the two keys.
pub fn random_distance(seed: u64, a: &str, b: &str) -> f64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let mut h = fnv1a(lo.as_bytes(), 0xcbf2_9ce4_8422_2325 ^ splitmix64(seed));
    h = fnv1a(&[0xff], h);
    h = fnv1a(hi.as_bytes(), h);
    (splitmix64(h) >> 11) as f64 / (1u64 << 53) as f64
}

pub fn feature_distance(
    method: DistanceMethod,
    a: &SentenceFeatures,
    b: &SentenceFeatures,
    resources: &DistanceResources,
) -> Result<f64> {
    use SentenceFeatures as F;
    match (method, a, b) {
        (DistanceMethod::Ed, F::Pos(x), F::Pos(y)) => Ok(pos_edit_distance(x, y) as f64),
        (DistanceMethod::Wmd, F::Bow(x), F::Bow(y)) => Ok(rwmd_nbow(x, y, resources.vectors(method)?)),
        (DistanceMethod::Sd, F::Sif(x), F::Sif(y)) => Ok((x - y).mapv(|d| d * d).sum().sqrt()),
        (DistanceMethod::Rd { seed }, F::Key(x), F::Key(y)) => Ok(random_distance(seed, x, y)),
        _ => Err(Error::Retrieval(format!("features do not match method {method}"))),
    }
}

/// Distance between the sentences of two instances.
pub fn sentence_distance(
    method: DistanceMethod,
    a: &PredicateInstance,
    b: &PredicateInstance,
    resources: &DistanceResources,
) -> Result<f64> {
    let fa = sentence_features(method, &a.sentence, resources)?;
    let fb = sentence_features(method, &b.sentence, resources)?;
    feature_distance(method, &fa, &fb, resources)
}
