use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gazetteer::GazetteerIndex;
use crate::dialogue_acts::DaLabel;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::text;
use crate::types::{Span, TopicId};

const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BioTag {
    B,
    I,
    O,
}

impl BioTag {
    pub const ALL: [BioTag; 3] = [BioTag::B, BioTag::I, BioTag::O];
    /// Argmax tie preference.
    pub const PREFERENCE: [BioTag; 3] = [BioTag::O, BioTag::B, BioTag::I];

    pub fn index(self) -> usize {
        match self {
            BioTag::B => 0,
            BioTag::I => 1,
            BioTag::O => 2,
        }
    }

    pub fn parse(s: &str) -> Option<BioTag> {
        match s.trim() {
            "B" | "b" => Some(BioTag::B),
            "I" | "i" => Some(BioTag::I),
            "O" | "o" => Some(BioTag::O),
            _ => None,
        }
    }

    pub fn can_start(self) -> bool {
        self != BioTag::I
    }

    pub fn can_follow(self, prev: BioTag) -> bool {
        !(prev == BioTag::O && self == BioTag::I)
    }
}

/// A tag sequence is valid when it never enters `I` from the start or from `O`.
pub fn is_valid_sequence(tags: &[BioTag]) -> bool {
    tags.first().is_none_or(|t| t.can_start()) && tags.windows(2).all(|w| w[1].can_follow(w[0]))
}

/// Maximal `B I*` runs.
pub fn tags_to_spans(tags: &[BioTag]) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut open: Option<usize> = None;
    for (i, t) in tags.iter().enumerate() {
        match t {
            BioTag::B => {
                if let Some(s) = open.take() {
                    spans.push(Span::new(s, i));
                }
                open = Some(i);
            }
            BioTag::I => {}
            BioTag::O => {
                if let Some(s) = open.take() {
                    spans.push(Span::new(s, i));
                }
            }
        }
    }
    if let Some(s) = open {
        spans.push(Span::new(s, tags.len()));
    }
    spans
}

pub fn spans_to_tags(len: usize, spans: &[Span]) -> Vec<BioTag> {
    let mut tags = vec![BioTag::O; len];
    for s in spans {
        for (k, t) in tags.iter_mut().enumerate().take(s.end).skip(s.start) {
            *t = if k == s.start { BioTag::B } else { BioTag::I };
        }
    }
    tags
}

/// Per-token features: the token, context n-grams, gazetteer type flags and
/// the turn's topic and dialogue act.
pub fn bio_features(
    tokens: &[String],
    gazetteer: Option<&GazetteerIndex>,
    topic: Option<&TopicId>,
    da: Option<DaLabel>,
) -> Vec<Vec<String>> {
    let n = tokens.len();
    let tok = |i: isize| -> &str {
        if i < 0 {
            "<s>"
        } else if i as usize >= n {
            "</s>"
        } else {
            &tokens[i as usize]
        }
    };
    let mut gaz: Vec<Vec<String>> = vec![Vec::new(); n];
    if let Some(g) = gazetteer {
        let max = g.max_name_len().min(n);
        for len in 1..=max {
            for start in 0..=n - len {
                let mut types: Vec<&str> = g
                    .exact(&tokens[start..start + len])
                    .map(|r| r.entity_type.as_str())
                    .collect();
                types.sort_unstable();
                types.dedup();
                for ty in types {
                    gaz[start].push(format!("gaz:B:{ty}"));
                    for slot in gaz.iter_mut().take(start + len).skip(start + 1) {
                        slot.push(format!("gaz:I:{ty}"));
                    }
                }
            }
        }
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let p = i as isize;
        let mut f = vec![
            "bias".to_string(),
            format!("w={}", tok(p)),
            format!("w-1={}", tok(p - 1)),
            format!("w+1={}", tok(p + 1)),
            format!("w-1:w={} {}", tok(p - 1), tok(p)),
            format!("w:w+1={} {}", tok(p), tok(p + 1)),
            format!("w-1:w:w+1={} {} {}", tok(p - 1), tok(p), tok(p + 1)),
            format!("w-2:w-1:w={} {} {}", tok(p - 2), tok(p - 1), tok(p)),
        ];
        let word = tok(p);
        if word.chars().any(|c| c.is_ascii_digit()) {
            f.push("shape=digit".into());
        }
        f.append(&mut gaz[i]);
        if let Some(t) = topic {
            f.push(format!("topic={t}"));
        }
        if let Some(d) = da {
            f.push(format!("da={d}"));
        }
        out.push(f);
    }
    out
}

/// Linear-chain weights: start scores, `transitions[prev][next]` and
/// per-feature emissions, all indexed by [`BioTag::index`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct BioWeights<S> {
    pub version: u32,
    pub start: [S; 3],
    pub transitions: [[S; 3]; 3],
    pub emissions: BTreeMap<String, [S; 3]>,
    pub epochs: usize,
    pub epochs_run: usize,
    pub seed: u64,
    pub averaged: bool,
}

impl<S: Scalar> Default for BioWeights<S> {
    fn default() -> Self {
        BioWeights {
            version: MODEL_VERSION,
            start: [S::zero(); 3],
            transitions: [[S::zero(); 3]; 3],
            emissions: BTreeMap::new(),
            epochs: 0,
            epochs_run: 0,
            seed: 0,
            averaged: false,
        }
    }
}

impl<S: Scalar> BioWeights<S> {
    /// Emission score of each tag at each position, summed in feature order.
    pub fn emission_table(&self, features: &[Vec<String>]) -> Vec<[S; 3]> {
        features
            .iter()
            .map(|fs| {
                let mut e = [S::zero(); 3];
                for f in fs {
                    if let Some(w) = self.emissions.get(f) {
                        for k in 0..3 {
                            e[k] = e[k] + w[k];
                        }
                    }
                }
                e
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_text(data: &str) -> Result<Self> {
        let w: Self = serde_json::from_str(data).map_err(|e| Error::Model(format!("BIO model: {e}")))?;
        if w.version != MODEL_VERSION {
            return Err(Error::Model(format!("BIO model version {} unsupported", w.version)));
        }
        Ok(w)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

/// Score of a fixed tag sequence, accumulated as
/// `((start + e0) + trans) + e1 ...`, the same order the decoder uses.
pub fn sequence_score<S: Scalar>(emissions: &[[S; 3]], tags: &[BioTag], w: &BioWeights<S>) -> S {
    let mut acc = S::zero();
    for (t, tag) in tags.iter().enumerate() {
        let y = tag.index();
        if t == 0 {
            acc = w.start[y] + emissions[0][y];
        } else {
            acc = acc + w.transitions[tags[t - 1].index()][y];
            acc = acc + emissions[t][y];
        }
    }
    acc
}

/// Viterbi decoding under the BIO constraints. Ties resolve in the order
/// O, B, I at every step.
pub fn viterbi<S: Scalar>(emissions: &[[S; 3]], w: &BioWeights<S>) -> (Vec<BioTag>, S) {
    let m = emissions.len();
    if m == 0 {
        return (Vec::new(), S::zero());
    }
    let neg = S::neg_infinity();
    let mut delta = vec![[neg; 3]; m];
    let mut back = vec![[BioTag::O; 3]; m];
    for y in BioTag::ALL {
        if y.can_start() {
            delta[0][y.index()] = w.start[y.index()] + emissions[0][y.index()];
        }
    }
    for t in 1..m {
        for y in BioTag::ALL {
            let mut best: Option<(BioTag, S)> = None;
            for prev in BioTag::PREFERENCE {
                let d = delta[t - 1][prev.index()];
                if !y.can_follow(prev) || d == neg {
                    continue;
                }
                let cand = d + w.transitions[prev.index()][y.index()];
                if best.is_none_or(|(_, b)| cand > b) {
                    best = Some((prev, cand));
                }
            }
            if let Some((prev, s)) = best {
                delta[t][y.index()] = s + emissions[t][y.index()];
                back[t][y.index()] = prev;
            }
        }
    }
    let mut last = BioTag::O;
    let mut best = neg;
    for y in BioTag::PREFERENCE {
        let s = delta[m - 1][y.index()];
        if s > best {
            best = s;
            last = y;
        }
    }
    let mut tags = vec![BioTag::O; m];
    tags[m - 1] = last;
    for t in (1..m).rev() {
        tags[t - 1] = back[t][tags[t].index()];
    }
    (tags, best)
}

pub fn bio_decode<S: Scalar>(features: &[Vec<String>], w: &BioWeights<S>) -> Vec<BioTag> {
    viterbi(&w.emission_table(features), w).0
}

/// One annotated utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct BioExample {
    pub tokens: Vec<String>,
    pub tags: Vec<BioTag>,
    pub topic: Option<TopicId>,
    pub da: Option<DaLabel>,
}

/// `tokens<TAB>tags[<TAB>topic[<TAB>da]]`, tokens and tags space-separated.
pub fn parse_bio_corpus(data: &str, file: &str) -> Result<Vec<BioExample>> {
    let mut out = Vec::new();
    for (line_no, line) in text::data_lines(data) {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 2 {
            return Err(Error::parse(file, line_no, "expected tokens<TAB>tags"));
        }
        let tokens: Vec<String> = cols[0].split_whitespace().map(str::to_lowercase).collect();
        let tags = cols[1]
            .split_whitespace()
            .map(|t| BioTag::parse(t).ok_or_else(|| Error::parse(file, line_no, format!("bad tag `{t}`"))))
            .collect::<Result<Vec<_>>>()?;
        if tags.len() != tokens.len() {
            return Err(Error::parse(
                file,
                line_no,
                format!("{} tokens but {} tags", tokens.len(), tags.len()),
            ));
        }
        let topic = cols.get(2).map(|t| t.trim()).filter(|t| !t.is_empty()).map(TopicId::new);
        let da = cols.get(3).and_then(|d| DaLabel::parse_known(d));
        out.push(BioExample { tokens, tags, topic, da });
    }
    Ok(out)
}

/// Averaged structured perceptron with Viterbi inference.
pub fn bio_train<S: Scalar>(
    examples: &[BioExample],
    gazetteer: Option<&GazetteerIndex>,
    epochs: usize,
    seed: u64,
) -> Result<BioWeights<S>> {
    if examples.is_empty() {
        return Err(Error::Training("empty BIO corpus".into()));
    }
    for (i, ex) in examples.iter().enumerate() {
        if ex.tokens.len() != ex.tags.len() {
            return Err(Error::Training(format!(
                "example {i}: {} tokens but {} tags",
                ex.tokens.len(),
                ex.tags.len()
            )));
        }
        if !is_valid_sequence(&ex.tags) {
            return Err(Error::Training(format!("example {i}: invalid BIO sequence")));
        }
    }
    let feats: Vec<Vec<Vec<String>>> = examples
        .iter()
        .map(|ex| bio_features(&ex.tokens, gazetteer, ex.topic.as_ref(), ex.da))
        .collect();

    let zero = S::zero();
    let one = S::one();
    let mut w = BioWeights::<S> {
        epochs,
        seed,
        ..Default::default()
    };
    let mut u_start = [zero; 3];
    let mut u_trans = [[zero; 3]; 3];
    let mut u_em: HashMap<String, [S; 3]> = HashMap::new();
    let mut c = one;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();

    for _ in 0..epochs {
        w.epochs_run += 1;
        order.shuffle(&mut rng);
        let mut mistakes = 0;
        for &i in &order {
            let gold = &examples[i].tags;
            let pred = bio_decode(&feats[i], &w);
            if pred != *gold {
                mistakes += 1;
                for (tags, sign) in [(gold, one), (&pred, -one)] {
                    if let Some(first) = tags.first() {
                        let y = first.index();
                        w.start[y] = w.start[y] + sign;
                        u_start[y] = u_start[y] + sign * c;
                    }
                    for pair in tags.windows(2) {
                        let (a, b) = (pair[0].index(), pair[1].index());
                        w.transitions[a][b] = w.transitions[a][b] + sign;
                        u_trans[a][b] = u_trans[a][b] + sign * c;
                    }
                    for (t, tag) in tags.iter().enumerate() {
                        let y = tag.index();
                        for f in &feats[i][t] {
                            let e = w.emissions.entry(f.clone()).or_insert([zero; 3]);
                            e[y] = e[y] + sign;
                            let ue = u_em.entry(f.clone()).or_insert([zero; 3]);
                            ue[y] = ue[y] + sign * c;
                        }
                    }
                }
            }
            c = c + one;
        }
        if mistakes == 0 {
            break;
        }
    }

    let mut avg = w.clone();
    avg.averaged = true;
    for y in 0..3 {
        avg.start[y] = w.start[y] - u_start[y] / c;
        for z in 0..3 {
            avg.transitions[y][z] = w.transitions[y][z] - u_trans[y][z] / c;
        }
    }
    for (f, e) in avg.emissions.iter_mut() {
        let u = u_em.get(f).copied().unwrap_or([zero; 3]);
        for k in 0..3 {
            e[k] = e[k] - u[k] / c;
        }
    }
    avg.emissions.retain(|_, e| e.iter().any(|x| *x != zero));
    w.emissions.retain(|_, e| e.iter().any(|x| *x != zero));

    let fit = |m: &BioWeights<S>| {
        feats
            .iter()
            .zip(examples)
            .filter(|(f, ex)| bio_decode(f, m) == ex.tags)
            .count()
    };
    if fit(&avg) >= fit(&w) {
        Ok(avg)
    } else {
        Ok(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Exhaustive search over every valid sequence, same tie order.
    fn brute_force(em: &[[f64; 3]], w: &BioWeights<f64>) -> (Vec<BioTag>, f64) {
        let m = em.len();
        let mut best: Option<(Vec<BioTag>, f64)> = None;
        let total = 3usize.pow(m as u32);
        let mut all: Vec<Vec<BioTag>> = (0..total)
            .map(|mut code| {
                let mut seq = Vec::with_capacity(m);
                for _ in 0..m {
                    seq.push(BioTag::PREFERENCE[code % 3]);
                    code /= 3;
                }
                seq
            })
            .filter(|s| is_valid_sequence(s))
            .collect();
        // lexicographic in preference rank, first element most significant
        all.sort_by_key(|s| s.iter().map(|t| BioTag::PREFERENCE.iter().position(|p| p == t).unwrap()).collect::<Vec<_>>());
        for seq in all {
            let s = sequence_score(em, &seq, w);
            if best.as_ref().is_none_or(|(_, b)| s > *b) {
                best = Some((seq, s));
            }
        }
        best.unwrap_or((Vec::new(), 0.0))
    }

    fn arb_weights() -> impl Strategy<Value = (Vec<[f64; 3]>, BioWeights<f64>)> {
        let small = || (-4i32..=4).prop_map(|x| x as f64 * 0.5);
        (
            proptest::collection::vec([small(), small(), small()], 1..=6),
            [small(), small(), small()],
            [[small(), small(), small()], [small(), small(), small()], [small(), small(), small()]],
        )
            .prop_map(|(em, start, transitions)| {
                (
                    em,
                    BioWeights {
                        start,
                        transitions,
                        ..Default::default()
                    },
                )
            })
    }

    proptest! {
        #[test]
        fn viterbi_matches_exhaustive_search((em, w) in arb_weights()) {
            let (tags, score) = viterbi(&em, &w);
            let (_, oracle) = brute_force(&em, &w);
            prop_assert!(is_valid_sequence(&tags));
            prop_assert_eq!(score, oracle);
            prop_assert_eq!(sequence_score(&em, &tags, &w), score);
        }

        #[test]
        fn decoded_tags_are_valid((em, w) in arb_weights()) {
            let (tags, _) = viterbi(&em, &w);
            prop_assert_eq!(tags.len(), em.len());
            prop_assert!(is_valid_sequence(&tags));
        }
    }

    #[test]
    fn zero_weights_decode_to_outside() {
        let w = BioWeights::<f64>::default();
        let (tags, _) = viterbi(&[[0.0; 3]; 4], &w);
        assert_eq!(tags, vec![BioTag::O; 4]);
    }

    #[test]
    fn empty_input() {
        let (tags, s) = viterbi::<f64>(&[], &BioWeights::default());
        assert!(tags.is_empty());
        assert_eq!(s, 0.0);
    }

    #[test]
    fn spans_round_trip() {
        let tags = vec![BioTag::O, BioTag::B, BioTag::I, BioTag::B, BioTag::O];
        let spans = tags_to_spans(&tags);
        assert_eq!(spans, vec![Span::new(1, 3), Span::new(3, 4)]);
        assert_eq!(spans_to_tags(5, &spans), tags);
    }

    #[test]
    fn training_learns_toy_corpus() {
        let data = "i like taylor swift\tO O B I\n\
                    taylor swift is great\tB I O O\n\
                    have you heard of adele\tO O O O B\n\
                    adele sings well\tB O O\n\
                    i like pizza\tO O O\n";
        let ex = parse_bio_corpus(data, "toy").unwrap();
        let w: BioWeights<f64> = bio_train(&ex, None, 30, 1).unwrap();
        for e in &ex {
            let f = bio_features(&e.tokens, None, None, None);
            assert_eq!(bio_decode(&f, &w), e.tags);
        }
        let again: BioWeights<f64> = bio_train(&ex, None, 30, 1).unwrap();
        assert_eq!(w, again);
        assert_eq!(BioWeights::<f64>::from_text(&w.to_text()).unwrap(), w);
    }

    #[test]
    fn mismatched_lengths_rejected() {
        assert!(parse_bio_corpus("a b\tO", "x").is_err());
        let bad = BioExample {
            tokens: vec!["a".into()],
            tags: vec![BioTag::I],
            topic: None,
            da: None,
        };
        assert!(bio_train::<f64>(&[bad], None, 3, 1).is_err());
        assert!(bio_train::<f64>(&[], None, 3, 1).is_err());
    }
}
