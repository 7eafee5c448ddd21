use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::text;
use crate::types::EntityType;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Prf {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Prf {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ElScores {
    /// Canonical id only.
    pub entity: Prf,
    /// Canonical id and type.
    pub entity_type: Prf,
}

fn multiset_overlap<K: std::hash::Hash + Eq>(gold: &[K], pred: &[K]) -> usize {
    let mut counts: HashMap<&K, usize> = HashMap::new();
    for g in gold {
        *counts.entry(g).or_insert(0) += 1;
    }
    let mut hit = 0;
    for p in pred {
        if let Some(c) = counts.get_mut(p) {
            if *c > 0 {
                *c -= 1;
                hit += 1;
            }
        }
    }
    hit
}

/// Micro-averaged scores over utterances. Each side lists `(uri, type)`
/// per utterance; matching ignores position.
pub fn evaluate(gold: &[Vec<(String, EntityType)>], pred: &[Vec<(String, EntityType)>]) -> ElScores {
    assert_eq!(gold.len(), pred.len(), "gold and predicted corpora differ in length");
    let (mut tp_e, mut tp_t, mut n_gold, mut n_pred) = (0, 0, 0, 0);
    for (g, p) in gold.iter().zip(pred) {
        n_gold += g.len();
        n_pred += p.len();
        tp_t += multiset_overlap(g, p);
        let gu: Vec<&String> = g.iter().map(|(u, _)| u).collect();
        let pu: Vec<&String> = p.iter().map(|(u, _)| u).collect();
        tp_e += multiset_overlap(&gu, &pu);
    }
    ElScores {
        entity: Prf::from_counts(tp_e, n_pred - tp_e, n_gold - tp_e),
        entity_type: Prf::from_counts(tp_t, n_pred - tp_t, n_gold - tp_t),
    }
}

/// One annotated utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedUtterance {
    pub text: String,
    pub gold: Vec<(String, EntityType)>,
}

/// `utterance \t uri|Type;uri|Type` rows, `-` for no entities.
pub fn parse_el_corpus(data: &str, file: &str) -> Result<Vec<AnnotatedUtterance>> {
    let mut out = Vec::new();
    for (line_no, line) in text::data_lines(data) {
        let (utt, gold) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(file, line_no, "expected utterance<TAB>links"))?;
        let mut links = Vec::new();
        for item in gold.split(';').map(str::trim).filter(|x| !x.is_empty() && *x != "-") {
            let (uri, ty) = item
                .rsplit_once('|')
                .ok_or_else(|| Error::parse(file, line_no, format!("link `{item}` is not uri|Type")))?;
            let ty = EntityType::parse(ty)
                .ok_or_else(|| Error::parse(file, line_no, format!("unknown entity type `{ty}`")))?;
            links.push((uri.trim().to_string(), ty));
        }
        out.push(AnnotatedUtterance {
            text: utt.trim().to_string(),
            gold: links,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn type_errors_count_only_in_typed_scores() {
        let gold = vec![vec![("A".to_string(), EntityType::Movie)], vec![("B".to_string(), EntityType::Song)]];
        let pred = vec![vec![("A".to_string(), EntityType::Book)], vec![]];
        let s = evaluate(&gold, &pred);
        assert_eq!((s.entity.tp, s.entity.fp, s.entity.fn_), (1, 0, 1));
        assert_eq!(s.entity.precision, 1.0);
        assert_eq!(s.entity.recall, 0.5);
        assert_eq!(s.entity_type.tp, 0);
        assert_eq!(s.entity_type.f1, 0.0);
    }

    #[test]
    fn corpus_rows() {
        let c = parse_el_corpus("# c\nhi there\t-\nbad blood by taylor\tBad_Blood|Song;Taylor_Swift|Musician\n", "c").unwrap();
        assert_eq!(c.len(), 2);
        assert!(c[0].gold.is_empty());
        assert_eq!(c[1].gold[1], ("Taylor_Swift".to_string(), EntityType::Musician));
        assert!(parse_el_corpus("x\tA|Robot\n", "c").is_err());
    }
}
