use std::collections::{BTreeMap, HashMap};

use super::{Sentence, NULL_ROLE};
use crate::error::{Error, Result};

/// Reserved entry for out-of-vocabulary items; always id 0.
pub const UNKNOWN: &str = "<unk>";

/// Dense bijection between strings and ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    items: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    /// Build from an explicit item list. The first item must be [`UNKNOWN`].
    pub fn from_items(items: Vec<String>) -> Result<Self> {
        if items.first().map(String::as_str) != Some(UNKNOWN) {
            return Err(Error::Invalid(format!("vocabulary must start with {UNKNOWN}")));
        }
        let mut index = HashMap::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            if index.insert(item.clone(), i).is_some() {
                return Err(Error::Invalid(format!("duplicate vocabulary item `{item}`")));
            }
        }
        Ok(Vocab { items, index })
    }

    fn from_counts(counts: BTreeMap<&str, usize>, min_freq: usize, reserved: &[&str]) -> Self {
        let mut kept: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|(w, c)| *c >= min_freq && !reserved.contains(w) && *w != UNKNOWN)
            .collect();
        // Most frequent first; BTreeMap order breaks ties lexicographically.
        kept.sort_by_key(|&(_, c)| std::cmp::Reverse(c));
        let items = std::iter::once(UNKNOWN)
            .chain(reserved.iter().copied())
            .chain(kept.into_iter().map(|(w, _)| w))
            .map(str::to_owned)
            .collect();
        Vocab::from_items(items).expect("reserved items are distinct")
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Id of `item`, or the unknown id.
    pub fn lookup(&self, item: &str) -> usize {
        self.index.get(item).copied().unwrap_or(0)
    }

    pub fn get(&self, item: &str) -> Option<usize> {
        self.index.get(item).copied()
    }

    pub fn inverse(&self, id: usize) -> &str {
        &self.items[id]
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn unknown_id(&self) -> usize {
        0
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabs {
    pub word: Vocab,
    pub lemma: Vocab,
    pub pos: Vocab,
    pub role: Vocab,
}

impl Vocabs {
    pub fn null_role(&self) -> usize {
        1
    }
}

/// Build vocabularies over a training corpus.
///
/// Word forms and lemmas seen fewer than `min_freq` times map to the
/// unknown id. POS tags and roles are kept whenever observed. The role
/// vocabulary reserves id 1 for [`NULL_ROLE`].
pub fn build_vocabs(corpus: &[Sentence], min_freq: usize) -> Result<Vocabs> {
    if corpus.is_empty() {
        return Err(Error::Invalid("cannot build vocabularies from an empty corpus".into()));
    }
    if min_freq == 0 {
        return Err(Error::Config("min_freq must be at least 1".into()));
    }
    let mut words = BTreeMap::new();
    let mut lemmas = BTreeMap::new();
    let mut tags = BTreeMap::new();
    let mut roles = BTreeMap::new();
    for t in corpus.iter().flat_map(|s| &s.tokens) {
        *words.entry(t.form.as_str()).or_insert(0) += 1;
        *lemmas.entry(t.lemma.as_str()).or_insert(0) += 1;
        *tags.entry(t.pos.as_str()).or_insert(0) += 1;
        for r in t.roles.iter().flatten() {
            *roles.entry(r.as_str()).or_insert(0) += 1;
        }
    }
    Ok(Vocabs {
        word: Vocab::from_counts(words, min_freq, &[]),
        lemma: Vocab::from_counts(lemmas, min_freq, &[]),
        pos: Vocab::from_counts(tags, 1, &[]),
        role: Vocab::from_counts(roles, 1, &[NULL_ROLE]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_conll, Token};

    fn sentence(words: &[&str]) -> Sentence {
        Sentence {
            id: "x".into(),
            tokens: words.iter().map(|w| Token::new(w, w, "NN")).collect(),
        }
    }

    #[test]
    fn min_freq_threshold() {
        let corpus = vec![sentence(&["a", "a", "b"]), sentence(&["a"])];
        let v = build_vocabs(&corpus, 2).unwrap();
        assert_eq!(v.word.items(), &[UNKNOWN, "a"]);
        assert_eq!(v.word.lookup("b"), v.word.unknown_id());
        assert_ne!(v.word.lookup("a"), v.word.unknown_id());
    }

    #[test]
    fn min_freq_one_keeps_everything() {
        let corpus = vec![sentence(&["a", "a", "b", "c"])];
        let v = build_vocabs(&corpus, 1).unwrap();
        let ids: Vec<usize> = ["a", "b", "c"].iter().map(|w| v.word.lookup(w)).collect();
        assert_eq!(ids, vec![1, 2, 3]);
        for (id, item) in v.word.items().iter().enumerate() {
            assert_eq!(v.word.lookup(item), id);
        }
    }

    #[test]
    fn roles_from_lost_example() {
        let corpus = parse_conll(crate::corpus::tests::LOST).unwrap();
        let v = build_vocabs(&corpus, 1).unwrap();
        let mut roles: Vec<&str> = v.role.items()[1..].iter().map(String::as_str).collect();
        roles.sort();
        assert_eq!(roles, vec!["A0", "A1", "AM-MNR", NULL_ROLE]);
        assert_eq!(v.role.lookup(NULL_ROLE), v.null_role());
    }

    #[test]
    fn empty_corpus_is_rejected() {
        assert!(build_vocabs(&[], 1).is_err());
    }

    #[test]
    fn from_items_requires_unknown_first() {
        assert!(Vocab::from_items(vec!["a".into()]).is_err());
        assert!(Vocab::from_items(vec![UNKNOWN.into(), "a".into(), "a".into()]).is_err());
    }
}
