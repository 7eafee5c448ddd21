use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::bio::{bio_decode, bio_features, tags_to_spans, BioWeights};
use super::common::CommonPhraseList;
use super::gazetteer::{sort_candidates, GazetteerIndex, ScoredCandidate, EXACT_SCORE};
use super::pool::{LookupIndex, DEFAULT_POOL_CAP};
use super::rerank::{RerankContext, Reranker};
use crate::dialogue_acts::DaLabel;
use crate::types::{EntitySource, EntityType, LinkedEntity, Span, TopicId};

/// A mention with its ranked gazetteer candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct MentionCandidates {
    pub span: Span,
    pub text: String,
    pub candidates: Vec<ScoredCandidate>,
}

/// Queries the index with each noun phrase and with the whole utterance.
///
/// A noun phrase yields a mention over its own span. The whole-utterance
/// query contributes only names occurring verbatim as a token run, each as a
/// mention over that run, so exact whole-mention hits always score 2.0 and
/// outrank partial ones.
pub fn query_candidates(
    index: &GazetteerIndex,
    tokens: &[String],
    noun_phrases: &[Span],
    types: Option<&[EntityType]>,
) -> Vec<MentionCandidates> {
    let mut by_span: BTreeMap<Span, Vec<ScoredCandidate>> = BTreeMap::new();
    for np in noun_phrases {
        if np.end > tokens.len() || np.is_empty() {
            continue;
        }
        let hits = index.query_tokens(&tokens[np.start..np.end], types);
        if !hits.is_empty() {
            by_span.entry(*np).or_default().extend(hits);
        }
    }
    let n = tokens.len();
    for len in 1..=index.max_name_len().min(n) {
        for start in 0..=n - len {
            let run = &tokens[start..start + len];
            for rec in index.exact(run) {
                if types.is_some_and(|ts| !ts.contains(&rec.entity_type)) {
                    continue;
                }
                by_span.entry(Span::new(start, start + len)).or_default().push(ScoredCandidate {
                    record: rec.clone(),
                    score: EXACT_SCORE,
                });
            }
        }
    }
    by_span
        .into_iter()
        .map(|(span, mut candidates)| {
            sort_candidates(&mut candidates);
            candidates.dedup_by(|a, b| a.record.uri == b.record.uri && a.record.entity_type == b.record.entity_type);
            MentionCandidates {
                span,
                text: tokens[span.start..span.end].join(" "),
                candidates,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LinkPath {
    #[default]
    Ensemble,
    Trained,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkerConfig {
    pub path: LinkPath,
    /// Minimum relevance for an ensemble link.
    pub min_score: f64,
    pub pool_cap: usize,
}

impl Default for LinkerConfig {
    fn default() -> Self {
        LinkerConfig {
            path: LinkPath::Ensemble,
            min_score: 1.0,
            pool_cap: DEFAULT_POOL_CAP,
        }
    }
}

/// Per-turn context for linking.
#[derive(Debug, Clone, Copy, Default)]
pub struct LinkContext<'a> {
    /// Restrict linking to these types (the active topic's entity types).
    pub topic_types: Option<&'a [EntityType]>,
    pub topic: Option<&'a TopicId>,
    pub da: Option<DaLabel>,
}

pub struct EntityLinker {
    pub gazetteer: GazetteerIndex,
    pub common: CommonPhraseList,
    pub lookup: LookupIndex,
    pub tagger: Option<BioWeights<f64>>,
    pub reranker: Reranker<f64>,
    pub config: LinkerConfig,
}

impl EntityLinker {
    pub fn new(gazetteer: GazetteerIndex, common: CommonPhraseList) -> Self {
        EntityLinker {
            gazetteer,
            common,
            lookup: LookupIndex::default(),
            tagger: None,
            reranker: Reranker::default(),
            config: LinkerConfig::default(),
        }
    }

    /// Links entities in one utterance. The trained path needs a tagger and
    /// falls back to the ensemble path without one. Output is ordered by
    /// span and has at most one entity per span, no two overlapping.
    pub fn link_entities(&self, tokens: &[String], noun_phrases: &[Span], ctx: LinkContext<'_>) -> Vec<LinkedEntity> {
        match (self.config.path, &self.tagger) {
            (LinkPath::Trained, Some(tagger)) => self.link_trained(tokens, ctx, tagger),
            _ => self.link_ensemble(tokens, noun_phrases, ctx),
        }
    }

    pub fn link_ensemble(&self, tokens: &[String], noun_phrases: &[Span], ctx: LinkContext<'_>) -> Vec<LinkedEntity> {
        let mentions = query_candidates(&self.gazetteer, tokens, noun_phrases, ctx.topic_types);
        let linked: Vec<LinkedEntity> = mentions
            .into_iter()
            .filter(|m| !self.common.is_suppressed(&m.text))
            .filter_map(|m| {
                let best = m.candidates.into_iter().next()?;
                (best.score >= self.config.min_score).then(|| LinkedEntity {
                    span: m.span,
                    surface: m.text,
                    uri: best.record.uri,
                    entity_type: best.record.entity_type,
                    score: best.score,
                    source: EntitySource::Ensemble,
                    gender: best.record.gender,
                    summary: best.record.summary,
                    popularity: best.record.popularity,
                })
            })
            .collect();
        resolve_overlaps(linked)
    }

    fn link_trained(&self, tokens: &[String], ctx: LinkContext<'_>, tagger: &BioWeights<f64>) -> Vec<LinkedEntity> {
        let feats = bio_features(tokens, Some(&self.gazetteer), ctx.topic, ctx.da);
        let spans = tags_to_spans(&bio_decode(&feats, tagger));
        let mut out = Vec::new();
        for span in spans {
            let text = tokens[span.start..span.end].join(" ");
            if self.common.is_suppressed(&text) {
                continue;
            }
            let pool: Vec<_> = self
                .lookup
                .candidate_pool(&text, self.config.pool_cap)
                .into_iter()
                .filter(|c| ctx.topic_types.is_none_or(|ts| ts.contains(&c.entity_type)))
                .collect();
            let rctx = RerankContext {
                mention: &text,
                topic_types: ctx.topic_types.unwrap_or(&[]),
            };
            let Some((best, score)) = self.reranker.rerank(&pool, &rctx).into_iter().next() else {
                continue;
            };
            let rec = self.gazetteer.records().iter().find(|r| r.uri == best.uri);
            out.push(LinkedEntity {
                span,
                surface: text,
                uri: best.uri.clone(),
                entity_type: best.entity_type,
                score,
                source: EntitySource::Trained,
                gender: rec.and_then(|r| r.gender),
                summary: rec.and_then(|r| r.summary.clone()),
                popularity: best.popularity,
            });
        }
        out
    }
}

/// Greedy non-overlapping selection: higher score, then longer span, then
/// more popular wins; the result is ordered by span.
pub fn resolve_overlaps(mut linked: Vec<LinkedEntity>) -> Vec<LinkedEntity> {
    linked.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(b.span.len().cmp(&a.span.len()))
            .then(b.popularity.cmp(&a.popularity))
            .then(a.span.cmp(&b.span))
    });
    let mut kept: Vec<LinkedEntity> = Vec::new();
    for e in linked {
        if kept.iter().all(|k| !k.span.overlaps(&e.span)) {
            kept.push(e);
        }
    }
    kept.sort_by_key(|e| e.span);
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entity_linking::gazetteer::GazetteerRecord;
    use crate::entity_linking::bio::BioTag;
    use crate::text::tokenize;

    fn linker() -> EntityLinker {
        let g = GazetteerIndex::build(vec![
            GazetteerRecord::new("Taylor Swift", EntityType::Musician, "Taylor_Swift", 950),
            GazetteerRecord::new("Taylor Swift", EntityType::Movie, "Taylor_Swift_(documentary)", 10),
            GazetteerRecord::new("Bad Blood", EntityType::Song, "Bad_Blood_(song)", 600),
            GazetteerRecord::new("Bad", EntityType::Album, "Bad_(album)", 700),
            GazetteerRecord::new("How Are You", EntityType::Movie, "How_Are_You_(film)", 5),
            GazetteerRecord::new("Kobe Bryant", EntityType::SportsPlayer, "Kobe_Bryant", 900),
        ]);
        let common = CommonPhraseList::new([("how are you".to_string(), 900)], 60, Vec::<String>::new());
        EntityLinker::new(g, common)
    }

    const MUSIC: &[EntityType] = &[EntityType::Album, EntityType::MusicalAct, EntityType::Musician, EntityType::Song];

    #[test]
    fn music_topic_prefers_musician() {
        let l = linker();
        let toks = tokenize("i like taylor swift");
        let ctx = LinkContext {
            topic_types: Some(MUSIC),
            ..Default::default()
        };
        let out = l.link_entities(&toks, &[Span::new(2, 4)], ctx);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].uri, "Taylor_Swift");
        assert_eq!(out[0].entity_type, EntityType::Musician);
    }

    #[test]
    fn exact_beats_partial() {
        let l = linker();
        let toks = tokenize("bad blood");
        let m = query_candidates(&l.gazetteer, &toks, &[Span::new(0, 2)], None);
        let whole = m.iter().find(|m| m.span == Span::new(0, 2)).unwrap();
        assert_eq!(whole.candidates[0].record.uri, "Bad_Blood_(song)");
        assert!(whole.candidates[0].score > whole.candidates[1].score);
        let out = l.link_entities(&toks, &[Span::new(0, 2)], LinkContext::default());
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].uri, "Bad_Blood_(song)");
    }

    #[test]
    fn unknown_phrase_has_no_candidates() {
        let l = linker();
        let toks = tokenize("purple elephants");
        assert!(query_candidates(&l.gazetteer, &toks, &[Span::new(0, 2)], None).is_empty());
    }

    #[test]
    fn kobe_and_suppression() {
        let l = linker();
        let out = l.link_entities(&tokenize("what do you think about kobe bryant"), &[Span::new(5, 7)], LinkContext::default());
        assert_eq!(out[0].uri, "Kobe_Bryant");
        assert_eq!(out[0].entity_type, EntityType::SportsPlayer);
        assert!(l.link_entities(&tokenize("how are you"), &[], LinkContext::default()).is_empty());
    }

    #[test]
    fn gazetteer_flag_drives_tagger() {
        let l = linker();
        let mut w = BioWeights::<f64>::default();
        w.emissions.insert("gaz:B:Musician".into(), [3.0, 0.0, 0.0]);
        w.emissions.insert("gaz:I:Musician".into(), [0.0, 3.0, 0.0]);
        let toks = tokenize("i like taylor swift");
        let f = bio_features(&toks, Some(&l.gazetteer), None, None);
        assert_eq!(bio_decode(&f, &w), vec![BioTag::O, BioTag::O, BioTag::B, BioTag::I]);
    }
}
