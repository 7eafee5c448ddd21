use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::text;

/// Scale applied to a word's valence when a negator precedes it.
pub const NEGATION_SCALAR: f64 = -0.74;
/// Normalization constant of the `x / sqrt(x^2 + alpha)` squashing.
pub const NORMALIZATION_ALPHA: f64 = 15.0;
pub const NEGATION_WINDOW: usize = 3;
/// Scores beyond these bounds count as positive / negative.
pub const POSITIVE_THRESHOLD: f64 = 0.3;
pub const NEGATIVE_THRESHOLD: f64 = -0.3;

const NEGATORS: [&str; 10] = [
    "not", "no", "never", "don't", "doesn't", "didn't", "isn't", "wasn't", "can't", "won't",
];

/// Word -> valence lexicon scorer.
#[derive(Debug, Clone, Default)]
pub struct SentimentLexicon {
    valence: HashMap<String, f64>,
}

impl SentimentLexicon {
    pub fn from_pairs<I: IntoIterator<Item = (String, f64)>>(pairs: I) -> Self {
        SentimentLexicon {
            valence: pairs.into_iter().collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = text::file_label(path);
        let mut valence = HashMap::new();
        for (line_no, line) in text::read_data_lines(path)? {
            let mut cols = line.split('\t');
            let word = cols.next().unwrap_or("").trim().to_lowercase();
            let v: f64 = cols
                .next()
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| Error::parse(&file, line_no, "expected word<TAB>valence"))?;
            valence.insert(word, v);
        }
        Ok(SentimentLexicon { valence })
    }

    pub fn valence(&self, word: &str) -> Option<f64> {
        self.valence.get(word).copied()
    }

    /// Sum of word valences, flipped by a negator in the preceding
    /// three tokens, squashed into [-1, 1].
    pub fn score(&self, utterance: &str) -> f64 {
        let toks = text::tokenize(utterance);
        let mut sum = 0.0;
        for (i, tok) in toks.iter().enumerate() {
            let Some(mut v) = self.valence(tok) else { continue };
            let lo = i.saturating_sub(NEGATION_WINDOW);
            if toks[lo..i].iter().any(|t| NEGATORS.contains(&t.as_str())) {
                v *= NEGATION_SCALAR;
            }
            sum += v;
        }
        if sum == 0.0 {
            return 0.0;
        }
        (sum / (sum * sum + NORMALIZATION_ALPHA).sqrt()).clamp(-1.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    Positive,
    Neutral,
    Negative,
}

pub fn polarity(score: f64) -> Polarity {
    if score > POSITIVE_THRESHOLD {
        Polarity::Positive
    } else if score < NEGATIVE_THRESHOLD {
        Polarity::Negative
    } else {
        Polarity::Neutral
    }
}
