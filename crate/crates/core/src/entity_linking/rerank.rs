use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::pool::LookupEntry;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::text;
use crate::types::EntityType;

pub const NUM_FEATURES: usize = 4;
const MODEL_VERSION: u32 = 1;

/// Context a candidate is scored against.
#[derive(Debug, Clone, Default)]
pub struct RerankContext<'a> {
    pub mention: &'a str,
    /// Entity types owned by the active topic.
    pub topic_types: &'a [EntityType],
}

fn trigrams(s: &str) -> HashMap<String, usize> {
    let padded: Vec<char> = format!("  {} ", text::normalize(s)).chars().collect();
    let mut out = HashMap::new();
    for w in padded.windows(3) {
        *out.entry(w.iter().collect()).or_insert(0) += 1;
    }
    out
}

/// Cosine similarity of character-trigram count vectors.
pub fn trigram_cosine(a: &str, b: &str) -> f64 {
    let (ta, tb) = (trigrams(a), trigrams(b));
    let dot: usize = ta.iter().map(|(g, n)| n * tb.get(g).copied().unwrap_or(0)).sum();
    let na: usize = ta.values().map(|n| n * n).sum();
    let nb: usize = tb.values().map(|n| n * n).sum();
    if na == 0 || nb == 0 {
        return 0.0;
    }
    dot as f64 / ((na as f64).sqrt() * (nb as f64).sqrt())
}

/// `[type matches topic, ln(1 + popularity), trigram cosine, exact match]`
pub fn rerank_features<S: Scalar>(cand: &LookupEntry, ctx: &RerankContext<'_>) -> [S; NUM_FEATURES] {
    let type_match = ctx.topic_types.contains(&cand.entity_type);
    let exact = text::normalize(&cand.surface) == text::normalize(ctx.mention);
    [
        if type_match { S::one() } else { S::zero() },
        S::from_f64_lossy((cand.popularity as f64).ln_1p()),
        S::from_f64_lossy(trigram_cosine(&cand.surface, ctx.mention)),
        if exact { S::one() } else { S::zero() },
    ]
}

/// Linear candidate scorer trained with a pairwise margin objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Reranker<S> {
    pub version: u32,
    pub weights: [S; NUM_FEATURES],
}

impl<S: Scalar> Default for Reranker<S> {
    fn default() -> Self {
        let w = |x: f64| S::from_f64_lossy(x);
        Reranker {
            version: MODEL_VERSION,
            weights: [w(2.0), w(0.2), w(1.0), w(1.0)],
        }
    }
}

/// Training example: a mention, its pool and the gold uri.
#[derive(Debug, Clone)]
pub struct RerankExample {
    pub mention: String,
    pub topic_types: Vec<EntityType>,
    pub pool: Vec<LookupEntry>,
    pub gold_uri: String,
}

impl<S: Scalar> Reranker<S> {
    pub fn score(&self, cand: &LookupEntry, ctx: &RerankContext<'_>) -> S {
        let f = rerank_features::<S>(cand, ctx);
        self.weights.iter().zip(f).fold(S::zero(), |acc, (w, x)| acc + *w * x)
    }

    /// Sorted best first; ties by popularity then uri.
    pub fn rerank<'a>(&self, pool: &[&'a LookupEntry], ctx: &RerankContext<'_>) -> Vec<(&'a LookupEntry, S)> {
        let mut out: Vec<(&LookupEntry, S)> = pool.iter().map(|c| (*c, self.score(c, ctx))).collect();
        out.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(b.0.popularity.cmp(&a.0.popularity))
                .then(a.0.uri.cmp(&b.0.uri))
        });
        out
    }

    /// Pairwise hinge updates: whenever the gold candidate does not beat a
    /// negative by `margin`, move the weights along their feature difference.
    pub fn train(examples: &[RerankExample], epochs: usize, margin: f64, rate: f64) -> Result<Self> {
        if examples.is_empty() {
            return Err(Error::Training("empty rerank corpus".into()));
        }
        let margin = S::from_f64_lossy(margin);
        let rate = S::from_f64_lossy(rate);
        let mut model = Reranker {
            version: MODEL_VERSION,
            weights: [S::zero(); NUM_FEATURES],
        };
        for _ in 0..epochs {
            let mut violations = 0;
            for ex in examples {
                let ctx = RerankContext {
                    mention: &ex.mention,
                    topic_types: &ex.topic_types,
                };
                let Some(gold) = ex.pool.iter().find(|c| c.uri == ex.gold_uri) else {
                    continue;
                };
                let fg = rerank_features::<S>(gold, &ctx);
                for neg in ex.pool.iter().filter(|c| c.uri != ex.gold_uri) {
                    let fn_ = rerank_features::<S>(neg, &ctx);
                    let diff: Vec<S> = fg.iter().zip(fn_).map(|(g, n)| *g - n).collect();
                    let gap = model.weights.iter().zip(&diff).fold(S::zero(), |a, (w, d)| a + *w * *d);
                    if gap < margin {
                        violations += 1;
                        for (w, d) in model.weights.iter_mut().zip(&diff) {
                            *w = *w + rate * *d;
                        }
                    }
                }
            }
            if violations == 0 {
                break;
            }
        }
        Ok(model)
    }

    pub fn to_text(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let m: Self = serde_json::from_str(&std::fs::read_to_string(path)?)
            .map_err(|e| Error::Model(format!("rerank model: {e}")))?;
        if m.version != MODEL_VERSION {
            return Err(Error::Model(format!("rerank model version {} unsupported", m.version)));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}
