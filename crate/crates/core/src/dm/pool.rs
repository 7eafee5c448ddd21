use std::collections::{BTreeMap, HashSet};
use std::sync::mpsc;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::rg::{ResponseGenerator, RgContext, RgOutput};
use crate::text;
use crate::types::ResponseCandidate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemovalReason {
    Profanity,
    Repetition,
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Removal {
    pub candidate: ResponseCandidate,
    pub reason: RemovalReason,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResponsePool {
    pub candidates: Vec<ResponseCandidate>,
    pub removed: Vec<Removal>,
    /// Candidates that passed the profanity filter only because of masking.
    pub masked_bypass: Vec<String>,
}

/// Offensive-term filter with an allow-list of masked terms.
#[derive(Debug, Clone, Default)]
pub struct ProfanityFilter {
    terms: Vec<Vec<String>>,
    masked: Vec<Vec<String>>,
}

const MASK: &str = "\u{0}";

impl ProfanityFilter {
    pub fn new<I, J>(terms: I, masked: J) -> Self
    where
        I: IntoIterator<Item = String>,
        J: IntoIterator<Item = String>,
    {
        let prep = |v: Vec<String>| {
            let mut v: Vec<Vec<String>> = v.iter().map(|t| text::tokenize(t)).filter(|t| !t.is_empty()).collect();
            v.sort_by_key(|t| std::cmp::Reverse(t.len()));
            v
        };
        ProfanityFilter {
            terms: prep(terms.into_iter().collect()),
            masked: prep(masked.into_iter().collect()),
        }
    }

    fn hits(&self, tokens: &[String]) -> bool {
        self.terms.iter().any(|t| text::find_token_run(tokens, t).is_some())
    }

    pub fn mask(&self, tokens: &[String]) -> Vec<String> {
        let mut out = tokens.to_vec();
        for m in &self.masked {
            while let Some(i) = text::find_token_run(&out, m) {
                for slot in &mut out[i..i + m.len()] {
                    *slot = MASK.to_string();
                }
            }
        }
        out
    }

    /// `(offensive, bypassed_by_mask)`
    pub fn check(&self, body: &str) -> (bool, bool) {
        let toks = text::tokenize(body);
        let masked = self.mask(&toks);
        let offensive = self.hits(&masked);
        (offensive, !offensive && self.hits(&toks))
    }
}

/// Near-duplicate filter over recent system bodies.
#[derive(Debug, Clone)]
pub struct RepetitionFilter {
    pub threshold: f64,
    pub window: usize,
    stopwords: HashSet<String>,
}

impl RepetitionFilter {
    pub fn new(threshold: f64, window: usize, stopwords: impl IntoIterator<Item = String>) -> Self {
        RepetitionFilter {
            threshold,
            window,
            stopwords: stopwords.into_iter().collect(),
        }
    }

    fn content(&self, s: &str) -> Vec<String> {
        text::tokenize(s)
            .into_iter()
            .filter(|t| !self.stopwords.contains(t))
            .collect()
    }

    pub fn is_repeat(&self, body: &str, previous: &[&str]) -> bool {
        let norm = text::normalize(body);
        let cand = self.content(body);
        let skip = previous.len().saturating_sub(self.window);
        previous[skip..].iter().any(|p| {
            if text::normalize(p) == norm {
                return true;
            }
            let prev = self.content(p);
            if cand.is_empty() || prev.is_empty() {
                return false;
            }
            text::jaccard(cand.iter().map(String::as_str), prev.iter().map(String::as_str)) >= self.threshold
        })
    }
}

/// Drops empty, offensive and repeated candidates, recording why.
pub fn filter_pool(
    raw: Vec<ResponseCandidate>,
    profanity: &ProfanityFilter,
    repetition: &RepetitionFilter,
    previous_bodies: &[&str],
) -> ResponsePool {
    let mut pool = ResponsePool::default();
    for c in raw {
        if c.body.trim().is_empty() {
            pool.removed.push(Removal {
                candidate: c,
                reason: RemovalReason::Empty,
            });
            continue;
        }
        let (offensive, bypass) = profanity.check(&c.text());
        if offensive {
            pool.removed.push(Removal {
                candidate: c,
                reason: RemovalReason::Profanity,
            });
            continue;
        }
        if repetition.is_repeat(&c.body, previous_bodies) {
            pool.removed.push(Removal {
                candidate: c,
                reason: RemovalReason::Repetition,
            });
            continue;
        }
        if bypass {
            pool.masked_bypass.push(c.rg.clone());
        }
        pool.candidates.push(c);
    }
    pool
}

#[derive(Debug, Clone, Copy)]
pub struct PoolBudget {
    pub per_rg: Duration,
    pub deadline: Duration,
}

impl Default for PoolBudget {
    fn default() -> Self {
        PoolBudget {
            per_rg: Duration::from_millis(300),
            deadline: Duration::from_millis(800),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "detail")]
pub enum RgStatus {
    Ok,
    TimedOut,
    Failed(String),
}

#[derive(Debug, Default)]
pub struct Collected {
    /// Outputs of RGs that answered in time, by id.
    pub outputs: BTreeMap<String, RgOutput>,
    pub status: BTreeMap<String, RgStatus>,
    pub latency_ms: BTreeMap<String, u64>,
}

/// Calls every RG on its own thread. Each RG gets `per_rg` from the start of
/// the fan-out, and nothing is awaited past `deadline`. Late answers are
/// discarded; panics and errors are recorded, never propagated.
pub fn collect_outputs(rgs: &[Arc<dyn ResponseGenerator>], ctx: Arc<RgContext>, budget: PoolBudget) -> Collected {
    let start = Instant::now();
    let (tx, rx) = mpsc::channel::<(String, Result<RgOutput, String>, u64)>();
    for rg in rgs {
        let rg = rg.clone();
        let ctx = ctx.clone();
        let tx = tx.clone();
        let spawned = std::thread::Builder::new()
            .name(format!("rg-{}", rg.id()))
            .spawn(move || {
                let t0 = Instant::now();
                let out = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| rg.respond(&ctx)));
                let res = match out {
                    Ok(Ok(o)) => Ok(o),
                    Ok(Err(e)) => Err(e.to_string()),
                    Err(_) => Err("panicked".to_string()),
                };
                let _ = tx.send((rg.id().to_string(), res, t0.elapsed().as_millis() as u64));
            });
        if let Err(e) = spawned {
            log::error!("could not spawn response generator thread: {e}");
        }
    }
    drop(tx);

    let mut collected = Collected::default();
    for rg in rgs {
        collected.status.insert(rg.id().to_string(), RgStatus::TimedOut);
    }
    let limit = budget.per_rg.min(budget.deadline);
    let mut pending = rgs.len();
    while pending > 0 {
        let left = limit.saturating_sub(start.elapsed());
        match rx.recv_timeout(left) {
            Ok((id, res, ms)) => {
                pending -= 1;
                collected.latency_ms.insert(id.clone(), ms);
                match res {
                    Ok(o) => {
                        collected.status.insert(id.clone(), RgStatus::Ok);
                        collected.outputs.insert(id, o);
                    }
                    Err(e) => {
                        log::warn!("response generator `{id}` failed: {e}");
                        collected.status.insert(id, RgStatus::Failed(e));
                    }
                }
            }
            Err(_) => break,
        }
    }
    for (id, st) in &collected.status {
        if *st == RgStatus::TimedOut {
            log::warn!("response generator `{id}` exceeded its time budget");
        }
    }
    collected
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::TopicId;

    fn cand(rg: &str, body: &str) -> ResponseCandidate {
        ResponseCandidate::new(rg, TopicId::new("movies"), body)
    }

    fn filters() -> (ProfanityFilter, RepetitionFilter) {
        (
            ProfanityFilter::new(
                ["damn".to_string(), "king".to_string(), "president".to_string()],
                ["king".to_string(), "president".to_string(), "saturated".to_string()],
            ),
            RepetitionFilter::new(0.8, 20, ["the", "a", "is", "i", "of"].map(String::from)),
        )
    }

    #[test]
    fn masked_term_survives() {
        let (p, r) = filters();
        let pool = filter_pool(vec![cand("kg", "King Lear is a great play.")], &p, &r, &[]);
        assert_eq!(pool.candidates.len(), 1);
        assert_eq!(pool.masked_bypass, vec!["kg"]);
    }

    #[test]
    fn profanity_removed() {
        let (p, r) = filters();
        let pool = filter_pool(vec![cand("kg", "That damn movie.")], &p, &r, &[]);
        assert!(pool.candidates.is_empty());
        assert_eq!(pool.removed[0].reason, RemovalReason::Profanity);
    }

    #[test]
    fn exact_repeat_removed() {
        let (p, r) = filters();
        let pool = filter_pool(
            vec![cand("kg", "I like that movie."), cand("kg", "Something new entirely.")],
            &p,
            &r,
            &["i like that movie"],
        );
        assert_eq!(pool.candidates.len(), 1);
        assert_eq!(pool.removed[0].reason, RemovalReason::Repetition);
    }

    #[test]
    fn repetition_window_is_bounded() {
        let (_, r) = filters();
        let mut prev = vec!["an old line about dragons"];
        prev.extend(std::iter::repeat_n("filler", 20));
        assert!(!r.is_repeat("an old line about dragons", &prev));
        assert!(r.is_repeat("an old line about dragons", &prev[..20]));
    }
}
