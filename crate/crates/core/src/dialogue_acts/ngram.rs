use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DaLabel;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::text;

const MODEL_VERSION: u32 = 1;
const ORDERS: [usize; 3] = [2, 3, 4];

/// Padded word n-grams of orders 2, 3 and 4.
pub fn ngram_features(segment: &str) -> Vec<String> {
    let mut padded = vec!["<s>".to_string()];
    padded.extend(text::tokenize(segment));
    padded.push("</s>".to_string());
    let mut feats = Vec::new();
    for n in ORDERS {
        if padded.len() < n {
            continue;
        }
        for w in padded.windows(n) {
            feats.push(format!("{n}:{}", w.join(" ")));
        }
    }
    feats
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 50, seed: 7 }
    }
}

/// Multiclass linear model over n-gram features.
///
/// `weights[feature][k]` and `bias[k]` are indexed by position in `labels`,
/// which is kept in lexicographic order so that argmax ties resolve to the
/// lexicographically first label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct NgramModel<S> {
    pub version: u32,
    pub labels: Vec<DaLabel>,
    pub weights: BTreeMap<String, Vec<S>>,
    pub bias: Vec<S>,
    pub epochs: usize,
    pub epochs_run: usize,
    pub seed: u64,
    /// Whether the stored weights are the averaged ones.
    pub averaged: bool,
}

impl<S: Scalar> NgramModel<S> {
    fn scores(&self, feats: &[String]) -> (Vec<S>, usize) {
        let mut scores = self.bias.clone();
        let mut active = 0;
        for f in feats {
            if let Some(w) = self.weights.get(f) {
                active += 1;
                for (s, wk) in scores.iter_mut().zip(w) {
                    *s = *s + *wk;
                }
            }
        }
        (scores, active)
    }

    pub fn predict(&self, segment: &str) -> DaLabel {
        tag_ngram(segment, self).0
    }

    pub fn accuracy(&self, corpus: &[(String, DaLabel)]) -> f64 {
        if corpus.is_empty() {
            return 0.0;
        }
        let ok = corpus.iter().filter(|(s, l)| self.predict(s) == *l).count();
        ok as f64 / corpus.len() as f64
    }

    pub fn to_text(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let model: Self =
            serde_json::from_str(text).map_err(|e| Error::Model(format!("dialogue-act model: {e}")))?;
        if model.version != MODEL_VERSION {
            return Err(Error::Model(format!(
                "dialogue-act model version {} unsupported",
                model.version
            )));
        }
        let k = model.labels.len();
        if model.bias.len() != k || model.weights.values().any(|w| w.len() != k) {
            return Err(Error::Model("weight vector length mismatch".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

fn argmax_top2<S: Scalar>(scores: &[S]) -> (usize, S) {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    let runner_up = scores
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != best)
        .map(|(_, s)| *s)
        .fold(S::neg_infinity(), S::max);
    let margin = if runner_up.is_finite() {
        scores[best] - runner_up
    } else {
        S::zero()
    };
    (best, margin)
}

/// `text<TAB>label` rows; labels must be in the schema.
pub fn parse_da_corpus(data: &str, file: &str) -> Result<Vec<(String, DaLabel)>> {
    let mut out = Vec::new();
    for (line_no, line) in text::data_lines(data) {
        let (utt, label) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(file, line_no, "expected text<TAB>label"))?;
        let label = DaLabel::parse_known(label)
            .ok_or_else(|| Error::parse(file, line_no, format!("unknown label `{}`", label.trim())))?;
        out.push((text::tokenize(utt).join(" "), label));
    }
    Ok(out)
}

/// Labels one segment. With no known feature the input is out of vocabulary
/// and maps to `statement-non-opinion` with zero margin.
pub fn tag_ngram<S: Scalar>(segment: &str, model: &NgramModel<S>) -> (DaLabel, S) {
    let (scores, active) = model.scores(&ngram_features(segment));
    if active == 0 {
        return (DaLabel::StatementNonOpinion, S::zero());
    }
    let (best, margin) = argmax_top2(&scores);
    (model.labels[best], margin)
}

/// Averaged multiclass perceptron. Training stops after the first epoch
/// without mistakes. The averaged weights are kept unless they fit the
/// training data worse than the raw ones.
pub fn train_ngram<S: Scalar>(corpus: &[(String, DaLabel)], config: TrainConfig) -> Result<NgramModel<S>> {
    if corpus.is_empty() {
        return Err(Error::Training("empty dialogue-act corpus".into()));
    }
    let mut labels: Vec<DaLabel> = corpus.iter().map(|(_, l)| *l).collect();
    labels.sort();
    labels.dedup();
    if labels.len() < 2 {
        return Err(Error::Training(format!(
            "corpus needs at least two labels, found only `{}`",
            labels[0]
        )));
    }
    let k = labels.len();
    let label_idx: HashMap<DaLabel, usize> = labels.iter().enumerate().map(|(i, l)| (*l, i)).collect();

    let mut feature_ids: BTreeMap<String, usize> = BTreeMap::new();
    let examples: Vec<(Vec<usize>, usize)> = corpus
        .iter()
        .map(|(seg, label)| {
            let mut ids: Vec<usize> = ngram_features(seg)
                .into_iter()
                .map(|f| {
                    let next = feature_ids.len();
                    *feature_ids.entry(f).or_insert(next)
                })
                .collect();
            ids.sort_unstable();
            ids.dedup();
            (ids, label_idx[label])
        })
        .collect();

    let nf = feature_ids.len();
    let zero = S::zero();
    let one = S::one();
    let mut w = vec![vec![zero; k]; nf];
    let mut u = vec![vec![zero; k]; nf];
    let mut b = vec![zero; k];
    let mut ub = vec![zero; k];
    let mut c = one;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut epochs_run = 0;

    for _ in 0..config.epochs {
        epochs_run += 1;
        order.shuffle(&mut rng);
        let mut mistakes = 0;
        for &i in &order {
            let (feats, gold) = &examples[i];
            let mut scores = b.clone();
            for &f in feats {
                for (s, wk) in scores.iter_mut().zip(&w[f]) {
                    *s = *s + *wk;
                }
            }
            let (pred, _) = argmax_top2(&scores);
            if pred != *gold {
                mistakes += 1;
                for &f in feats {
                    w[f][*gold] = w[f][*gold] + one;
                    w[f][pred] = w[f][pred] - one;
                    u[f][*gold] = u[f][*gold] + c;
                    u[f][pred] = u[f][pred] - c;
                }
                b[*gold] = b[*gold] + one;
                b[pred] = b[pred] - one;
                ub[*gold] = ub[*gold] + c;
                ub[pred] = ub[pred] - c;
            }
            c = c + one;
        }
        if mistakes == 0 {
            break;
        }
    }

    let names: Vec<String> = {
        let mut v = vec![String::new(); nf];
        for (name, id) in &feature_ids {
            v[*id] = name.clone();
        }
        v
    };
    let build = |averaged: bool| -> NgramModel<S> {
        let avg = |wv: &S, uv: &S| if averaged { *wv - *uv / c } else { *wv };
        let weights = names
            .iter()
            .enumerate()
            .map(|(f, name)| {
                let row: Vec<S> = w[f].iter().zip(&u[f]).map(|(wv, uv)| avg(wv, uv)).collect();
                (name.clone(), row)
            })
            .filter(|(_, row)| row.iter().any(|x| *x != zero))
            .collect();
        NgramModel {
            version: MODEL_VERSION,
            labels: labels.clone(),
            weights,
            bias: b.iter().zip(&ub).map(|(wv, uv)| avg(wv, uv)).collect(),
            epochs: config.epochs,
            epochs_run,
            seed: config.seed,
            averaged,
        }
    };
    let averaged = build(true);
    let raw = build(false);
    if averaged.accuracy(corpus) >= raw.accuracy(corpus) {
        Ok(averaged)
    } else {
        Ok(raw)
    }
}
