//! Reader and writer for the CoNLL-2009 column format.
//!
//! Columns: ID FORM LEMMA PLEMMA POS PPOS FEAT PFEAT HEAD PHEAD DEPREL
//! PDEPREL FILLPRED PRED APRED1 .. APREDn. The APRED columns map
//! positionally onto the predicates of the sentence (rows with
//! `FILLPRED = Y`) in textual order. Fields may be separated by tabs or
//! runs of spaces; output always uses a single tab.
//!
//! A comment line `# sent_id = X` sets the identifier of the following
//! sentence. Sentences without one are numbered from 1 in file order.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::{PredicateInstance, Sentence, Token, EMPTY};
use crate::error::{Error, Result};

/// Number of fixed columns before the APRED block.
pub const FIXED_COLUMNS: usize = 14;

const SENT_ID_PREFIX: &str = "# sent_id = ";

fn default_id(position: usize) -> String {
    (position + 1).to_string()
}

fn opt_field(field: &str) -> Option<String> {
    if field == EMPTY {
        None
    } else {
        Some(field.to_owned())
    }
}

/// Parse a CoNLL-2009 document into sentences.
pub fn parse_conll(text: &str) -> Result<Vec<Sentence>> {
    let mut sentences = Vec::new();
    let mut rows: Vec<(usize, Vec<&str>)> = Vec::new();
    let mut pending_id: Option<String> = None;

    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            if !rows.is_empty() {
                let id = pending_id.take().unwrap_or_else(|| default_id(sentences.len()));
                sentences.push(build_sentence(id, &rows)?);
                rows.clear();
            }
            continue;
        }
        if rows.is_empty() && trimmed.starts_with('#') {
            if let Some(id) = trimmed.strip_prefix(SENT_ID_PREFIX) {
                pending_id = Some(id.trim().to_owned());
            }
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() < FIXED_COLUMNS {
            return Err(Error::parse(
                lineno,
                format!(
                    "expected at least {FIXED_COLUMNS} columns, found {}",
                    fields.len()
                ),
            ));
        }
        if let Some((first_line, first)) = rows.first() {
            if first.len() != fields.len() {
                return Err(Error::parse(
                    lineno,
                    format!(
                        "ragged row: {} columns, but line {first_line} has {}",
                        fields.len(),
                        first.len()
                    ),
                ));
            }
        }
        rows.push((lineno, fields));
    }
    if !rows.is_empty() {
        let id = pending_id.take().unwrap_or_else(|| default_id(sentences.len()));
        sentences.push(build_sentence(id, &rows)?);
    }
    Ok(sentences)
}

fn build_sentence(id: String, rows: &[(usize, Vec<&str>)]) -> Result<Sentence> {
    let n_apred = rows[0].1.len() - FIXED_COLUMNS;
    let mut tokens = Vec::with_capacity(rows.len());
    for (lineno, f) in rows {
        let is_predicate = f[12] == "Y";
        if !is_predicate && f[13] != EMPTY {
            return Err(Error::parse(
                *lineno,
                format!("PRED `{}` on a row without FILLPRED=Y", f[13]),
            ));
        }
        tokens.push(Token {
            form: f[1].to_owned(),
            gold_lemma: f[2].to_owned(),
            lemma: f[3].to_owned(),
            gold_pos: f[4].to_owned(),
            pos: f[5].to_owned(),
            feat: f[6].to_owned(),
            pfeat: f[7].to_owned(),
            head: f[8].to_owned(),
            phead: f[9].to_owned(),
            deprel: f[10].to_owned(),
            pdeprel: f[11].to_owned(),
            is_predicate,
            pred_sense: is_predicate.then(|| f[13].to_owned()),
            roles: f[FIXED_COLUMNS..].iter().map(|r| opt_field(r)).collect(),
        });
    }
    let predicates = tokens.iter().filter(|t| t.is_predicate).count();
    if predicates != n_apred {
        return Err(Error::structure(
            &id,
            format!("{n_apred} APRED columns but {predicates} predicates"),
        ));
    }
    Ok(Sentence { id, tokens })
}

/// Serialize sentences back to CoNLL-2009.
///
/// When `predictions` is given, its labels replace the gold APRED
/// columns. Every predicate instance of every sentence must be covered.
pub fn write_conll(sentences: &[Sentence], predictions: Option<&[PredicateInstance]>) -> Result<String> {
    let lookup: Option<HashMap<(&str, usize), &PredicateInstance>> = predictions.map(|preds| {
        preds
            .iter()
            .map(|p| ((p.sentence.id.as_str(), p.predicate_index), p))
            .collect()
    });

    let mut out = String::new();
    for (position, sentence) in sentences.iter().enumerate() {
        if sentence.id != default_id(position) {
            let _ = writeln!(out, "{SENT_ID_PREFIX}{}", sentence.id);
        }
        let predicates = sentence.predicate_positions();
        let mut columns: Vec<Vec<Option<&str>>> = Vec::with_capacity(predicates.len());
        for (k, &p) in predicates.iter().enumerate() {
            match &lookup {
                Some(map) => {
                    let inst = map.get(&(sentence.id.as_str(), p)).ok_or_else(|| {
                        Error::MissingPrediction {
                            sentence: sentence.id.clone(),
                            predicate: p,
                        }
                    })?;
                    if inst.gold_labels.len() != sentence.len() {
                        return Err(Error::structure(
                            &sentence.id,
                            format!(
                                "prediction for predicate {p} has {} labels, sentence has {} tokens",
                                inst.gold_labels.len(),
                                sentence.len()
                            ),
                        ));
                    }
                    columns.push(
                        inst.gold_labels
                            .iter()
                            .map(|l| (l != super::NULL_ROLE).then_some(l.as_str()))
                            .collect(),
                    );
                }
                None => columns.push(
                    sentence
                        .tokens
                        .iter()
                        .map(|t| t.roles[k].as_deref())
                        .collect(),
                ),
            }
        }
        for (i, t) in sentence.tokens.iter().enumerate() {
            let _ = write!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                i + 1,
                t.form,
                t.gold_lemma,
                t.lemma,
                t.gold_pos,
                t.pos,
                t.feat,
                t.pfeat,
                t.head,
                t.phead,
                t.deprel,
                t.pdeprel,
                if t.is_predicate { "Y" } else { EMPTY },
                t.pred_sense.as_deref().unwrap_or(EMPTY),
            );
            for col in &columns {
                out.push('\t');
                out.push_str(col[i].unwrap_or(EMPTY));
            }
            out.push('\n');
        }
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_PRED: &str = "\
1\tJohn\tjohn\tjohn\tNNP\tNNP\t_\t_\t2\t2\tSBJ\tSBJ\t_\t_\tA0\tA0
2\twants\twant\twant\tVBZ\tVBZ\t_\t_\t0\t0\tROOT\tROOT\tY\twant.01\t_\t_
3\tto\tto\tto\tTO\tTO\t_\t_\t2\t2\tOPRD\tOPRD\t_\t_\tA1\t_
4\tleave\tleave\tleave\tVB\tVB\t_\t_\t3\t3\tIM\tIM\tY\tleave.01\t_\t_
";

    #[test]
    fn empty_input() {
        assert!(parse_conll("").unwrap().is_empty());
        assert!(parse_conll("\n\n  \n").unwrap().is_empty());
        assert_eq!(write_conll(&[], None).unwrap(), "");
    }

    #[test]
    fn two_predicates_map_positionally() {
        let s = parse_conll(TWO_PRED).unwrap();
        assert_eq!(s.len(), 1);
        let s = &s[0];
        assert_eq!(s.id, "1");
        assert_eq!(s.predicate_positions(), vec![1, 3]);
        assert_eq!(s.tokens[0].roles, vec![Some("A0".into()), Some("A0".into())]);
        assert_eq!(s.tokens[2].roles, vec![Some("A1".into()), None]);
        assert_eq!(s.tokens[1].pred_sense.as_deref(), Some("want.01"));
        assert_eq!(s.tokens[0].pred_sense, None);
    }

    #[test]
    fn ragged_rows_report_line() {
        let text = "\
1\ta\ta\ta\tDT\tDT\t_\t_\t0\t0\tR\tR\t_\t_
2\tb\tb\tb\tNN\tNN\t_\t_\t0\t0\tR\tR\t_\t_\t_
";
        match parse_conll(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn apred_count_mismatch() {
        let text = "1\ta\ta\ta\tDT\tDT\t_\t_\t0\t0\tR\tR\t_\t_\tA0\n";
        assert!(matches!(parse_conll(text), Err(Error::Structure { .. })));
    }

    #[test]
    fn too_few_columns() {
        assert!(matches!(parse_conll("1\ta\tb\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn sentence_ids_survive_writing() {
        let text = format!("# sent_id = wsj_0001\n{TWO_PRED}\n{TWO_PRED}");
        let parsed = parse_conll(&text).unwrap();
        assert_eq!(parsed[0].id, "wsj_0001");
        assert_eq!(parsed[1].id, "2");
        let written = write_conll(&parsed, None).unwrap();
        assert!(written.starts_with("# sent_id = wsj_0001\n"));
        assert_eq!(parse_conll(&written).unwrap(), parsed);
    }

    #[test]
    fn space_separated_input_is_normalized_to_tabs() {
        let spaced = TWO_PRED.replace('\t', "   ");
        let written = write_conll(&parse_conll(&spaced).unwrap(), None).unwrap();
        assert_eq!(written, format!("{TWO_PRED}\n"));
    }

    #[test]
    fn missing_prediction_names_instance() {
        let s = parse_conll(TWO_PRED).unwrap();
        let mut inst = super::super::extract_instances(&s[0]);
        inst.truncate(1);
        match write_conll(&s, Some(&inst)) {
            Err(Error::MissingPrediction { sentence, predicate }) => {
                assert_eq!(sentence, "1");
                assert_eq!(predicate, 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
