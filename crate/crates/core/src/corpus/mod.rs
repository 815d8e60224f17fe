//! CoNLL-2009 corpora, predicate instances, vocabularies and scoring.

mod conll;
mod eval;
mod vocab;

use std::sync::Arc;

pub use conll::{parse_conll, write_conll, FIXED_COLUMNS};
pub use eval::{confusion_matrix, score, ConfusionMatrix, Prf};
pub use vocab::{build_vocabs, Vocab, Vocabs, UNKNOWN};

/// Placeholder used by the column format for absent values.
pub const EMPTY: &str = "_";

/// Label of a token that is not an argument of the current predicate.
pub const NULL_ROLE: &str = "_";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub form: String,
    pub gold_lemma: String,
    /// Predicted lemma (PLEMMA).
    pub lemma: String,
    pub gold_pos: String,
    /// Predicted part of speech (PPOS).
    pub pos: String,
    pub feat: String,
    pub pfeat: String,
    pub head: String,
    pub phead: String,
    pub deprel: String,
    pub pdeprel: String,
    pub is_predicate: bool,
    pub pred_sense: Option<String>,
    /// Role of this token towards each predicate of the sentence, in
    /// textual predicate order.
    pub roles: Vec<Option<String>>,
}

impl Token {
    /// A token with only the columns the tagger reads filled in.
    pub fn new(form: &str, lemma: &str, pos: &str) -> Self {
        Token {
            form: form.to_owned(),
            gold_lemma: lemma.to_owned(),
            lemma: lemma.to_owned(),
            gold_pos: pos.to_owned(),
            pos: pos.to_owned(),
            feat: EMPTY.into(),
            pfeat: EMPTY.into(),
            head: "0".into(),
            phead: "0".into(),
            deprel: EMPTY.into(),
            pdeprel: EMPTY.into(),
            is_predicate: false,
            pred_sense: None,
            roles: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sentence {
    pub id: String,
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Token positions of the predicates, in textual order.
    pub fn predicate_positions(&self) -> Vec<usize> {
        self.tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| t.is_predicate)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn forms(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.form.as_str())
    }

    pub fn pos_tags(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.pos.as_str()).collect()
    }
}

/// One (sentence, predicate) pair viewed as a sequence-labeling problem.
///
/// `gold_labels[i]` is the role of token `i` towards the predicate, with
/// [`NULL_ROLE`] for non-arguments. Predicted instances use the same
/// type with the predictions stored in `gold_labels`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PredicateInstance {
    pub sentence: Arc<Sentence>,
    pub predicate_index: usize,
    pub gold_labels: Vec<String>,
}

impl PredicateInstance {
    /// Corpus-unique key: `<sentence id>#<predicate position>`.
    pub fn id(&self) -> String {
        format!("{}#{}", self.sentence.id, self.predicate_index)
    }

    pub fn len(&self) -> usize {
        self.gold_labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gold_labels.is_empty()
    }

    /// Copy of this instance carrying `labels` instead of the gold row.
    pub fn with_labels(&self, labels: Vec<String>) -> Self {
        PredicateInstance {
            sentence: Arc::clone(&self.sentence),
            predicate_index: self.predicate_index,
            gold_labels: labels,
        }
    }
}

/// Expand a sentence into one instance per predicate.
pub fn extract_instances(sentence: &Sentence) -> Vec<PredicateInstance> {
    let shared = Arc::new(sentence.clone());
    sentence
        .predicate_positions()
        .into_iter()
        .enumerate()
        .map(|(k, p)| PredicateInstance {
            sentence: Arc::clone(&shared),
            predicate_index: p,
            gold_labels: sentence
                .tokens
                .iter()
                .map(|t| t.roles[k].clone().unwrap_or_else(|| NULL_ROLE.to_owned()))
                .collect(),
        })
        .collect()
}

/// Instances of every sentence, in corpus order.
pub fn extract_all(sentences: &[Sentence]) -> Vec<PredicateInstance> {
    sentences.iter().flat_map(extract_instances).collect()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) const LOST: &str = "\
1\tShe\tshe\tshe\tPRP\tPRP\t_\t_\t2\t2\tSBJ\tSBJ\t_\t_\tA0
2\thas\thave\thave\tVBZ\tVBZ\t_\t_\t0\t0\tROOT\tROOT\t_\t_\t_
3\tlost\tlose\tlose\tVBN\tVBN\t_\t_\t2\t2\tVC\tVC\tY\tlose.02\t_
4\tit\tit\tit\tPRP\tPRP\t_\t_\t3\t3\tOBJ\tOBJ\t_\t_\tA1
5\tjust\tjust\tjust\tRB\tRB\t_\t_\t3\t3\tMNR\tMNR\t_\t_\tAM-MNR
6\tas\tas\tas\tRB\tRB\t_\t_\t7\t7\tAMOD\tAMOD\t_\t_\t_
7\tquickly\tquickly\tquickly\tRB\tRB\t_\t_\t5\t5\tAMOD\tAMOD\t_\t_\t_
";

    #[test]
    fn no_predicates_no_instances() {
        let text = "1\ta\ta\ta\tDT\tDT\t_\t_\t0\t0\tR\tR\t_\t_\n";
        let s = parse_conll(text).unwrap();
        assert!(extract_instances(&s[0]).is_empty());
    }

    #[test]
    fn lost_example_labels() {
        let s = parse_conll(LOST).unwrap();
        let inst = extract_instances(&s[0]);
        assert_eq!(inst.len(), 1);
        assert_eq!(inst[0].predicate_index, 2);
        assert_eq!(
            inst[0].gold_labels,
            vec!["A0", "_", "_", "A1", "AM-MNR", "_", "_"]
        );
        assert_eq!(inst[0].id(), "1#2");
    }

    #[test]
    fn two_predicates_give_independent_rows() {
        let text = "\
1\tJohn\tjohn\tjohn\tNNP\tNNP\t_\t_\t2\t2\tSBJ\tSBJ\t_\t_\tA0\tA0
2\twants\twant\twant\tVBZ\tVBZ\t_\t_\t0\t0\tROOT\tROOT\tY\twant.01\t_\t_
3\tto\tto\tto\tTO\tTO\t_\t_\t2\t2\tOPRD\tOPRD\t_\t_\tA1\t_
4\tleave\tleave\tleave\tVB\tVB\t_\t_\t3\t3\tIM\tIM\tY\tleave.01\t_\t_
";
        let s = parse_conll(text).unwrap();
        let inst = extract_instances(&s[0]);
        assert_eq!(inst.len(), 2);
        assert_eq!(inst[0].gold_labels, vec!["A0", "_", "A1", "_"]);
        assert_eq!(inst[1].gold_labels, vec!["A0", "_", "_", "_"]);
        assert_eq!(inst[1].predicate_index, 3);
    }
}
