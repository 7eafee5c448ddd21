use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::constraints::ResponseConstraints;
use crate::error::{Error, Result};
use crate::types::ResponseCandidate;

/// Back-off tier, 1 (all constraints met) to 4 (none).
pub fn tier(c: &ResponseCandidate, k: &ResponseConstraints) -> u8 {
    let topic = c.topic == k.topic;
    let entity = k.entity_mentions.is_empty() || c.entities.iter().any(|e| k.entity_mentions.contains(e));
    let da = k.dialogue_act.is_none() || c.dialogue_act == k.dialogue_act;
    match (topic, entity, da) {
        (true, true, true) => 1,
        (true, true, false) => 2,
        (true, false, _) => 3,
        _ => 4,
    }
}

/// Extra ordering applied inside a tier before RG preference.
pub trait CandidateScorer: Send + Sync {
    fn score(&self, candidate: &ResponseCandidate, constraints: &ResponseConstraints) -> f64;
}

/// Heuristic back-off ranker.
#[derive(Default)]
pub struct Ranker {
    /// RG ids in preference order. `prefix*` matches by prefix; unlisted
    /// RGs come last.
    pub preference: Vec<String>,
    pub scorer: Option<Box<dyn CandidateScorer>>,
}

impl Ranker {
    pub fn new(preference: Vec<String>) -> Self {
        Ranker {
            preference,
            scorer: None,
        }
    }

    pub fn preference_rank(&self, rg: &str) -> usize {
        self.preference
            .iter()
            .position(|p| match p.strip_suffix('*') {
                Some(prefix) => rg.starts_with(prefix),
                None => p == rg,
            })
            .unwrap_or(self.preference.len())
    }

    /// Picks from the best tier, then the most preferred RG, then at random.
    /// Returns the chosen index and its tier.
    pub fn rank(
        &self,
        pool: &[ResponseCandidate],
        constraints: &ResponseConstraints,
        rng: &mut ChaCha8Rng,
    ) -> Result<(usize, u8)> {
        if pool.is_empty() {
            return Err(Error::EmptyPool);
        }
        let key = |c: &ResponseCandidate| {
            let s = self.scorer.as_ref().map(|s| s.score(c, constraints)).unwrap_or(0.0);
            (tier(c, constraints), -s, self.preference_rank(&c.rg))
        };
        let keys: Vec<_> = pool.iter().map(key).collect();
        let best = keys
            .iter()
            .min_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)))
            .copied()
            .expect("non-empty");
        let tied: Vec<usize> = keys
            .iter()
            .enumerate()
            .filter(|(_, k)| k.0 == best.0 && k.1 == best.1 && k.2 == best.2)
            .map(|(i, _)| i)
            .collect();
        let pick = tied[rng.random_range(0..tied.len())];
        Ok((pick, best.0))
    }
}
