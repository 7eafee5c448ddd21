//! Two-stage NLU. Stage 1 (segmentation, red questions, sentiment, noun
//! phrases) runs first; stage 2 (dialogue acts, entity linking, topic
//! detection) reads its outputs. A module that panics leaves its field at a
//! neutral value and is named in [`NluBundle::degraded`].

pub mod phrases;
pub mod red;
pub mod segment;
pub mod sentiment;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dialogue_acts::{DaLabel, DaTagger};
use crate::entity_linking::{evaluate, AnnotatedUtterance, ElScores, EntityLinker, LinkContext};
use crate::state::DialogueState;
use crate::text;
use crate::topic::{TopicRegistry, TopicSignal};
use crate::types::{EntityType, LinkedEntity, Span, UtteranceSegment};

pub use phrases::PhraseChunker;
pub use red::{detect_red, RedCategory, RedFlag, RedTable};
pub use segment::{segment_utterance, RuleSegmenter, Segmenter, SegmenterModel};
pub use sentiment::{polarity, Polarity, SentimentLexicon};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NluBundle {
    pub tokens: Vec<String>,
    pub segments: Vec<UtteranceSegment>,
    pub entities: Vec<LinkedEntity>,
    pub sentiment: f64,
    pub red_flag: Option<RedFlag>,
    pub topic_signal: Option<TopicSignal>,
    pub noun_phrases: Vec<Span>,
    #[serde(default)]
    pub degraded: Vec<String>,
}

impl NluBundle {
    pub fn empty() -> Self {
        NluBundle {
            tokens: Vec::new(),
            segments: Vec::new(),
            entities: Vec::new(),
            sentiment: 0.0,
            red_flag: None,
            topic_signal: None,
            noun_phrases: Vec::new(),
            degraded: Vec::new(),
        }
    }

    /// Union of segment labels in first-seen order.
    pub fn das(&self) -> Vec<DaLabel> {
        let mut out = Vec::new();
        for s in &self.segments {
            for (l, _) in &s.da_labels {
                if !out.contains(l) {
                    out.push(*l);
                }
            }
        }
        out
    }

    pub fn has_da(&self, label: DaLabel) -> bool {
        self.segments.iter().any(|s| s.da_labels.iter().any(|(l, _)| *l == label))
    }

    /// Label of the last non-empty segment, which is what the user ended on.
    pub fn primary_da(&self) -> Option<DaLabel> {
        self.segments
            .iter()
            .rev()
            .find(|s| !s.text.is_empty())
            .and_then(|s| s.primary_da())
    }

    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }

    pub fn entity_uris(&self) -> Vec<String> {
        self.entities.iter().map(|e| e.uri.clone()).collect()
    }
}

pub struct NluPipeline {
    pub segmenter: Box<dyn Segmenter>,
    pub red: RedTable,
    pub sentiment: SentimentLexicon,
    pub chunker: PhraseChunker,
    pub da: DaTagger,
    pub linker: EntityLinker,
    pub topics: Arc<TopicRegistry>,
}

fn guarded<T>(name: &str, degraded: &mut Vec<String>, neutral: T, f: impl FnOnce() -> T) -> T {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(v) => v,
        Err(_) => {
            log::error!("nlu module `{name}` failed; using neutral value");
            degraded.push(name.to_string());
            neutral
        }
    }
}

impl NluPipeline {
    pub fn run(&self, user_text: &str, state: &DialogueState) -> NluBundle {
        let mut degraded = Vec::new();
        let tokens = text::tokenize(user_text);

        // stage 1
        let fallback_segments = vec![UtteranceSegment {
            text: tokens.join(" "),
            span: Span::new(0, tokens.len()),
            da_labels: Vec::new(),
        }];
        let mut segments = guarded("segmenter", &mut degraded, fallback_segments, || {
            self.segmenter.segment(&tokens)
        });
        let red_flag = guarded("red", &mut degraded, None, || detect_red(&segments, &self.red));
        let sentiment = guarded("sentiment", &mut degraded, 0.0, || self.sentiment.score(user_text));
        let noun_phrases = guarded("noun_phrases", &mut degraded, Vec::new(), || {
            self.chunker.noun_phrases(&tokens)
        });

        // stage 2
        for seg in segments.iter_mut() {
            let tagged = guarded("dialogue_acts", &mut degraded, Vec::new(), || self.da.tag(&seg.text));
            seg.da_labels = if tagged.is_empty() {
                vec![(DaLabel::StatementNonOpinion, 0.5)]
            } else {
                tagged.into_iter().map(|t| (t.label, t.confidence)).collect()
            };
        }
        let das: Vec<DaLabel> = segments
            .iter()
            .flat_map(|s| s.da_labels.iter().map(|(l, _)| *l))
            .collect();
        let navigation = das.iter().any(|d| d.is_navigation());
        let current = &state.topic_state.current_topic;
        let entities = guarded("entity_linking", &mut degraded, Vec::new(), || {
            let explicit = self.topics.explicit_match(&tokens, navigation);
            let restrict = explicit
                .as_ref()
                .map(|(t, _)| self.topics.owned_types(t))
                .filter(|types| !types.is_empty());
            let da = segments.last().and_then(|s| s.primary_da());
            let ctx = LinkContext {
                topic_types: restrict.as_deref(),
                topic: Some(explicit.as_ref().map(|(t, _)| t).unwrap_or(current)),
                da,
            };
            self.linker.link_entities(&tokens, &noun_phrases, ctx)
        });
        let topic_signal = guarded("topic", &mut degraded, None, || {
            self.topics.detect_topic(&tokens, &das, &entities, Some(current))
        });

        NluBundle {
            tokens,
            segments,
            entities,
            sentiment,
            red_flag,
            topic_signal,
            noun_phrases,
            degraded,
        }
    }

    /// Links every utterance of an annotated corpus from a fresh state and
    /// scores the result.
    pub fn evaluate_linking(&self, corpus: &[AnnotatedUtterance]) -> (ElScores, Vec<Vec<(String, EntityType)>>) {
        let state = DialogueState::new("el-eval", 0);
        let pred: Vec<Vec<(String, EntityType)>> = corpus
            .iter()
            .map(|u| {
                self.run(&u.text.to_lowercase(), &state)
                    .entities
                    .iter()
                    .map(|e| (e.uri.clone(), e.entity_type))
                    .collect()
            })
            .collect();
        let gold: Vec<_> = corpus.iter().map(|u| u.gold.clone()).collect();
        (evaluate(&gold, &pred), pred)
    }
}
