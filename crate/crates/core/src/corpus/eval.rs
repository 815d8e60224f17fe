use std::collections::HashMap;
use std::fmt;

use super::{PredicateInstance, NULL_ROLE};
use crate::error::{Error, Result};

/// Labeled argument precision, recall and F1.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub gold_args: u64,
    pub pred_args: u64,
    pub correct_args: u64,
}

impl Prf {
    pub fn from_counts(gold_args: u64, pred_args: u64, correct_args: u64) -> Self {
        let ratio = |num: u64, den: u64| if den > 0 { num as f64 / den as f64 } else { 0.0 };
        let precision = ratio(correct_args, pred_args);
        let recall = ratio(correct_args, gold_args);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Prf {
            precision,
            recall,
            f1,
            gold_args,
            pred_args,
            correct_args,
        }
    }
}

impl fmt::Display for Prf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "P={:.2} R={:.2} F1={:.2} (gold={} pred={} correct={})",
            100.0 * self.precision,
            100.0 * self.recall,
            100.0 * self.f1,
            self.gold_args,
            self.pred_args,
            self.correct_args
        )
    }
}

fn check_aligned(gold: &[PredicateInstance], pred: &[PredicateInstance]) -> Result<()> {
    if gold.len() != pred.len() {
        return Err(Error::Misaligned(format!(
            "{} gold instances, {} predicted",
            gold.len(),
            pred.len()
        )));
    }
    for (g, p) in gold.iter().zip(pred) {
        if g.sentence.id != p.sentence.id || g.predicate_index != p.predicate_index {
            return Err(Error::Misaligned(format!("gold {} paired with {}", g.id(), p.id())));
        }
        if g.len() != p.len() {
            return Err(Error::Misaligned(format!(
                "{}: {} gold labels, {} predicted",
                g.id(),
                g.len(),
                p.len()
            )));
        }
    }
    Ok(())
}

/// Score predicted arguments against gold. Null-role positions are not
/// arguments; a prediction counts as correct when its position carries the
/// same non-null gold label.
pub fn score(gold: &[PredicateInstance], pred: &[PredicateInstance]) -> Result<Prf> {
    check_aligned(gold, pred)?;
    let (mut n_gold, mut n_pred, mut n_correct) = (0u64, 0u64, 0u64);
    for (g, p) in gold.iter().zip(pred) {
        for (gl, pl) in g.gold_labels.iter().zip(&p.gold_labels) {
            let g_arg = gl != NULL_ROLE;
            let p_arg = pl != NULL_ROLE;
            n_gold += g_arg as u64;
            n_pred += p_arg as u64;
            n_correct += (g_arg && gl == pl) as u64;
        }
    }
    Ok(Prf::from_counts(n_gold, n_pred, n_correct))
}

/// Token-level confusion counts, rows indexed by gold label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn get(&self, gold: &str, pred: &str) -> Option<u64> {
        let g = self.labels.iter().position(|l| l == gold)?;
        let p = self.labels.iter().position(|l| l == pred)?;
        Some(self.counts[g][p])
    }

    pub fn row_sum(&self, gold: usize) -> u64 {
        self.counts[gold].iter().sum()
    }

    /// Tab-separated table with a header row.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("gold\\pred");
        for l in &self.labels {
            out.push('\t');
            out.push_str(l);
        }
        out.push('\n');
        for (l, row) in self.labels.iter().zip(&self.counts) {
            out.push_str(l);
            for c in row {
                out.push('\t');
                out.push_str(&c.to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// Count, for every token, the (gold, predicted) label pair, keeping only
/// pairs where both labels belong to `labels`.
pub fn confusion_matrix(
    gold: &[PredicateInstance],
    pred: &[PredicateInstance],
    labels: &[String],
) -> Result<ConfusionMatrix> {
    check_aligned(gold, pred)?;
    let position: HashMap<&str, usize> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let mut counts = vec![vec![0u64; labels.len()]; labels.len()];
    for (g, p) in gold.iter().zip(pred) {
        for (gl, pl) in g.gold_labels.iter().zip(&p.gold_labels) {
            if let (Some(&gi), Some(&pi)) = (position.get(gl.as_str()), position.get(pl.as_str())) {
                counts[gi][pi] += 1;
            }
        }
    }
    Ok(ConfusionMatrix {
        labels: labels.to_vec(),
        counts,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::corpus::{Sentence, Token};

    fn instance(labels: &[&str]) -> PredicateInstance {
        let sentence = Sentence {
            id: "s".into(),
            tokens: labels.iter().map(|_| Token::new("w", "w", "NN")).collect(),
        };
        PredicateInstance {
            sentence: Arc::new(sentence),
            predicate_index: 0,
            gold_labels: labels.iter().map(|l| l.to_string()).collect(),
        }
    }

    #[test]
    fn identity_scores_one() {
        let g = vec![instance(&["_", "A0", "A1"])];
        let prf = score(&g, &g).unwrap();
        assert_eq!((prf.precision, prf.recall, prf.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn one_wrong_label_of_two() {
        let g = vec![instance(&["_", "A0", "A1"])];
        let p = vec![instance(&["_", "A0", "A2"])];
        let prf = score(&g, &p).unwrap();
        assert_eq!((prf.precision, prf.recall, prf.f1), (0.5, 0.5, 0.5));
        assert_eq!((prf.gold_args, prf.pred_args, prf.correct_args), (2, 2, 1));
    }

    #[test]
    fn empty_prediction_is_zero() {
        let g = vec![instance(&["_", "A0", "A1"])];
        let p = vec![instance(&["_", "_", "_"])];
        let prf = score(&g, &p).unwrap();
        assert_eq!((prf.precision, prf.recall, prf.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn misaligned_sets_are_rejected() {
        let g = vec![instance(&["_", "A0"])];
        assert!(score(&g, &[]).is_err());
        assert!(score(&g, &[instance(&["_"])]).is_err());
    }

    #[test]
    fn confusion_counts() {
        let labels: Vec<String> = ["A2", "AM-LOC", "_"].iter().map(|s| s.to_string()).collect();
        let g = vec![instance(&["A2", "_", "A2"])];
        let p = vec![instance(&["AM-LOC", "_", "A2"])];
        let m = confusion_matrix(&g, &p, &labels).unwrap();
        assert_eq!(m.get("A2", "AM-LOC"), Some(1));
        assert_eq!(m.get("A2", "A2"), Some(1));
        assert_eq!(m.row_sum(0), 2);

        let same = confusion_matrix(&g, &g, &labels).unwrap();
        for (i, row) in same.counts.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                if i != j {
                    assert_eq!(*c, 0);
                }
            }
        }
        let empty = confusion_matrix(&[], &[], &labels).unwrap();
        assert!(empty.counts.iter().flatten().all(|c| *c == 0));
    }
}
