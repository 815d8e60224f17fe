use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;

use super::{feature_distance, sentence_features, DistanceMethod, DistanceResources};
use crate::corpus::{PredicateInstance, Sentence};
use crate::error::{Error, Result};

const HEADER: &str = "# neighbor-index v1";

/// One retrieved training instance.
#[derive(Clone, Debug, PartialEq)]
pub struct Neighbor {
    pub id: String,
    pub distance: f64,
}

/// An associated sentence together with the gold label row of its own
/// predicate.
#[derive(Clone, Debug, PartialEq)]
pub struct MemoryEntry {
    pub instance: PredicateInstance,
    pub distance: f64,
}

impl MemoryEntry {
    pub fn sentence(&self) -> &Sentence {
        &self.instance.sentence
    }

    pub fn labels(&self) -> &[String] {
        &self.instance.gold_labels
    }

    pub fn len(&self) -> usize {
        self.instance.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instance.is_empty()
    }
}

/// For every query instance, its `m` nearest training instances in
/// ascending distance, ties broken by training-corpus position.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighborIndex {
    pub method: DistanceMethod,
    pub m: usize,
    entries: Vec<(String, Vec<Neighbor>)>,
    lookup: HashMap<String, usize>,
}

fn same_instance(q: &PredicateInstance, t: &PredicateInstance) -> bool {
    q.predicate_index == t.predicate_index
        && q.sentence.id == t.sentence.id
        && (Arc::ptr_eq(&q.sentence, &t.sentence) || q.sentence == t.sentence)
}

/// Retrieve, for each query, the `m` closest training instances.
///
/// A query never retrieves itself when it also appears in `train`.
pub fn build_index(
    train: &[PredicateInstance],
    queries: &[PredicateInstance],
    method: DistanceMethod,
    m: usize,
    resources: &DistanceResources,
) -> Result<NeighborIndex> {
    if m == 0 {
        return Err(Error::Config("memory size m must be at least 1".into()));
    }
    if train.is_empty() {
        return Err(Error::Retrieval("training set is empty".into()));
    }

    // Features once per distinct training sentence.
    let mut sentence_slot: HashMap<*const Sentence, usize> = HashMap::new();
    let mut distinct: Vec<&Sentence> = Vec::new();
    let slots: Vec<usize> = train
        .iter()
        .map(|t| {
            *sentence_slot.entry(Arc::as_ptr(&t.sentence)).or_insert_with(|| {
                distinct.push(&t.sentence);
                distinct.len() - 1
            })
        })
        .collect();
    let features = distinct
        .par_iter()
        .map(|s| sentence_features(method, s, resources))
        .collect::<Result<Vec<_>>>()?;
    let train_ids: Vec<String> = train.iter().map(PredicateInstance::id).collect();

    let rows = queries
        .par_iter()
        .map(|q| -> Result<(String, Vec<Neighbor>)> {
            let qf = sentence_features(method, &q.sentence, resources)?;
            let by_sentence = features
                .iter()
                .map(|tf| feature_distance(method, &qf, tf, resources))
                .collect::<Result<Vec<f64>>>()?;
            let mut candidates: Vec<(f64, usize)> = train
                .iter()
                .enumerate()
                .filter(|(_, t)| !same_instance(q, t))
                .map(|(pos, _)| (by_sentence[slots[pos]], pos))
                .collect();
            if candidates.len() < m {
                return Err(Error::Retrieval(format!(
                    "query {} has {} candidates, fewer than m = {m}",
                    q.id(),
                    candidates.len()
                )));
            }
            candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let neighbors = candidates
                .into_iter()
                .take(m)
                .map(|(distance, pos)| Neighbor {
                    id: train_ids[pos].clone(),
                    distance,
                })
                .collect();
            Ok((q.id(), neighbors))
        })
        .collect::<Result<Vec<_>>>()?;
    NeighborIndex::from_entries(method, m, rows)
}

impl NeighborIndex {
    pub fn from_entries(method: DistanceMethod, m: usize, entries: Vec<(String, Vec<Neighbor>)>) -> Result<Self> {
        let mut lookup = HashMap::with_capacity(entries.len());
        for (i, (qid, neighbors)) in entries.iter().enumerate() {
            if lookup.insert(qid.clone(), i).is_some() {
                return Err(Error::Retrieval(format!("duplicate query id {qid}")));
            }
            if neighbors.len() != m {
                return Err(Error::Retrieval(format!(
                    "query {qid} has {} neighbors, expected {m}",
                    neighbors.len()
                )));
            }
        }
        Ok(NeighborIndex {
            method,
            m,
            entries,
            lookup,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, query_id: &str) -> Option<&[Neighbor]> {
        self.lookup.get(query_id).map(|&i| self.entries[i].1.as_slice())
    }

    pub fn entries(&self) -> &[(String, Vec<Neighbor>)] {
        &self.entries
    }

    /// The same index keeping only the first `m` neighbors of each query.
    pub fn truncated(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.m {
            return Err(Error::Config(format!("cannot truncate an m = {} index to {m}", self.m)));
        }
        let entries = self
            .entries
            .iter()
            .map(|(q, n)| (q.clone(), n[..m].to_vec()))
            .collect();
        NeighborIndex::from_entries(self.method, m, entries)
    }

    /// Training positions of every query's neighbors, in query order.
    pub fn resolve(&self, queries: &[PredicateInstance], train: &[PredicateInstance]) -> Result<Vec<Vec<usize>>> {
        let mut positions = HashMap::with_capacity(train.len());
        for (i, t) in train.iter().enumerate() {
            if positions.insert(t.id(), i).is_some() {
                return Err(Error::Retrieval(format!("duplicate training instance id {}", t.id())));
            }
        }
        queries
            .iter()
            .map(|q| {
                let qid = q.id();
                let neighbors = self
                    .get(&qid)
                    .ok_or_else(|| Error::Retrieval(format!("index has no entry for {qid}")))?;
                neighbors
                    .iter()
                    .map(|n| {
                        positions.get(&n.id).copied().ok_or_else(|| {
                            Error::Retrieval(format!("neighbor {} of {qid} is not in the training set", n.id))
                        })
                    })
                    .collect()
            })
            .collect()
    }

    /// Memory entries of one query.
    pub fn memory(&self, query_id: &str, train: &[PredicateInstance]) -> Result<Vec<MemoryEntry>> {
        let neighbors = self
            .get(query_id)
            .ok_or_else(|| Error::Retrieval(format!("index has no entry for {query_id}")))?;
        neighbors
            .iter()
            .map(|n| {
                train
                    .iter()
                    .find(|t| t.id() == n.id)
                    .map(|t| MemoryEntry {
                        instance: t.clone(),
                        distance: n.distance,
                    })
                    .ok_or_else(|| Error::Retrieval(format!("neighbor {} is not in the training set", n.id)))
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{HEADER}\nmethod\t{}\nm\t{}\n", self.method, self.m);
        for (q, neighbors) in &self.entries {
            out.push_str(q);
            for n in neighbors {
                let _ = write!(out, "\t{}\t{}", n.id, n.distance);
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == HEADER => {}
            _ => return Err(Error::parse(1, format!("expected `{HEADER}`"))),
        }
        let mut field = |key: &str| -> Result<String> {
            match lines.next() {
                Some((i, line)) => {
                    let (k, v) = line
                        .split_once('\t')
                        .ok_or_else(|| Error::parse(i + 1, format!("expected `{key}<TAB>value`")))?;
                    if k != key {
                        return Err(Error::parse(i + 1, format!("expected key `{key}`, found `{k}`")));
                    }
                    Ok(v.to_owned())
                }
                None => Err(Error::parse(0, format!("missing `{key}` line"))),
            }
        };
        let method: DistanceMethod = field("method")?.parse()?;
        let m_text = field("m")?;
        let m: usize = m_text
            .parse()
            .map_err(|_| Error::parse(3, format!("bad memory size `{m_text}`")))?;
        let mut entries = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len().is_multiple_of(2) {
                return Err(Error::parse(i + 1, "expected query id followed by (id, distance) pairs"));
            }
            let neighbors = fields[1..]
                .chunks(2)
                .map(|pair| {
                    let distance = pair[1]
                        .parse::<f64>()
                        .map_err(|_| Error::parse(i + 1, format!("bad distance `{}`", pair[1])))?;
                    Ok(Neighbor {
                        id: pair[0].to_owned(),
                        distance,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            entries.push((fields[0].to_owned(), neighbors));
        }
        NeighborIndex::from_entries(method, m, entries)
    }
}
