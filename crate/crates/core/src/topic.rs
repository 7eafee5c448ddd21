//! Topic registry and topic detection.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dialogue_acts::DaLabel;
use crate::error::{Error, Result};
use crate::text;
use crate::types::{EntityType, LinkedEntity, Span, TopicId};

/// One registry entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicClass {
    pub id: TopicId,
    /// Names that invoke the topic wherever they occur ("harry potter").
    #[serde(default)]
    pub expressions: Vec<String>,
    /// Weaker cues, honoured only in navigation turns or on their own.
    #[serde(default)]
    pub keywords: Vec<String>,
    #[serde(default)]
    pub subtopics: Vec<TopicId>,
    #[serde(default)]
    pub entity_types: Vec<EntityType>,
    #[serde(default)]
    pub priority: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvocationType {
    ExplicitName,
    EntityImplied,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicSignal {
    pub topic: TopicId,
    pub invocation: InvocationType,
    pub trigger: Span,
}

#[derive(Deserialize)]
struct RegistryFile {
    #[serde(default)]
    topic: Vec<TopicClass>,
}

#[derive(Debug, Clone)]
struct Cue {
    tokens: Vec<String>,
    topic: usize,
    explicit: bool,
}

/// Immutable topic table. Registry order breaks priority ties.
#[derive(Debug, Clone, Default)]
pub struct TopicRegistry {
    topics: Vec<TopicClass>,
    by_id: BTreeMap<TopicId, usize>,
    parent: BTreeMap<TopicId, TopicId>,
    cues: Vec<Cue>,
}

impl TopicRegistry {
    pub fn new(topics: Vec<TopicClass>) -> Result<Self> {
        let mut by_id = BTreeMap::new();
        for (i, t) in topics.iter().enumerate() {
            if by_id.insert(t.id.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate topic id `{}`", t.id)));
            }
        }
        let mut parent = BTreeMap::new();
        for t in &topics {
            for s in &t.subtopics {
                if !by_id.contains_key(s) {
                    return Err(Error::Config(format!(
                        "topic `{}` lists unknown subtopic `{s}`",
                        t.id
                    )));
                }
                if s == &t.id {
                    return Err(Error::Config(format!("topic `{s}` is its own subtopic")));
                }
                if let Some(prev) = parent.insert(s.clone(), t.id.clone()) {
                    return Err(Error::Config(format!(
                        "subtopic `{s}` has two parents, `{prev}` and `{}`",
                        t.id
                    )));
                }
            }
        }
        let mut cues = Vec::new();
        for (i, t) in topics.iter().enumerate() {
            for (list, explicit) in [(&t.expressions, true), (&t.keywords, false)] {
                for phrase in list {
                    let tokens = text::tokenize(phrase);
                    if !tokens.is_empty() {
                        cues.push(Cue {
                            tokens,
                            topic: i,
                            explicit,
                        });
                    }
                }
            }
        }
        let reg = TopicRegistry {
            topics,
            by_id,
            parent,
            cues,
        };
        for t in &reg.topics {
            let mut seen = HashSet::new();
            let mut cur = t.id.clone();
            while let Some(p) = reg.parent.get(&cur) {
                if !seen.insert(cur.clone()) {
                    return Err(Error::Config(format!("subtopic cycle through `{}`", t.id)));
                }
                cur = p.clone();
            }
        }
        Ok(reg)
    }

    pub fn parse(data: &str) -> Result<Self> {
        let file: RegistryFile =
            toml::from_str(data).map_err(|e| Error::Config(format!("topic registry: {e}")))?;
        Self::new(file.topic)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let data = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&data)
    }

    pub fn topics(&self) -> &[TopicClass] {
        &self.topics
    }

    pub fn get(&self, id: &TopicId) -> Option<&TopicClass> {
        self.by_id.get(id).map(|&i| &self.topics[i])
    }

    pub fn contains(&self, id: &TopicId) -> bool {
        self.by_id.contains_key(id)
    }

    pub fn parent(&self, id: &TopicId) -> Option<&TopicId> {
        self.parent.get(id)
    }

    /// Subtopics are counted and discussed under their top-level topic.
    pub fn top_level(&self, id: &TopicId) -> TopicId {
        let mut cur = id;
        while let Some(p) = self.parent.get(cur) {
            cur = p;
        }
        cur.clone()
    }

    /// Entity types owned by a topic and its subtopics.
    pub fn owned_types(&self, id: &TopicId) -> Vec<EntityType> {
        let mut out = Vec::new();
        let mut stack = vec![id.clone()];
        while let Some(t) = stack.pop() {
            if let Some(tc) = self.get(&t) {
                for ty in &tc.entity_types {
                    if !out.contains(ty) {
                        out.push(*ty);
                    }
                }
                stack.extend(tc.subtopics.iter().cloned());
            }
        }
        out
    }

    /// The highest-priority owner of the entity's type, as a top-level topic.
    pub fn entity_to_topic(&self, entity: &LinkedEntity) -> Option<TopicId> {
        self.type_to_topic(entity.entity_type)
    }

    pub fn type_to_topic(&self, ty: EntityType) -> Option<TopicId> {
        let mut best: Option<&TopicClass> = None;
        for t in &self.topics {
            if t.entity_types.contains(&ty) && best.is_none_or(|b| t.priority > b.priority) {
                best = Some(t);
            }
        }
        best.map(|t| self.top_level(&t.id))
    }

    /// Explicit topic mentions in a token sequence, longest match first.
    pub fn explicit_match(&self, tokens: &[String], navigation: bool) -> Option<(TopicId, Span)> {
        let mut best: Option<(&Cue, usize)> = None;
        for cue in &self.cues {
            let Some(start) = text::find_token_run(tokens, &cue.tokens) else {
                continue;
            };
            let allowed = cue.explicit || navigation || tokens.len() <= cue.tokens.len() + 2;
            if !allowed {
                continue;
            }
            let better = match best {
                None => true,
                Some((b, bstart)) => {
                    (cue.explicit, cue.tokens.len(), std::cmp::Reverse(start), self.topics[cue.topic].priority)
                        > (b.explicit, b.tokens.len(), std::cmp::Reverse(bstart), self.topics[b.topic].priority)
                }
            };
            if better {
                best = Some((cue, start));
            }
        }
        best.map(|(cue, start)| {
            (
                self.top_level(&self.topics[cue.topic].id),
                Span::new(start, start + cue.tokens.len()),
            )
        })
    }

    /// Explicit names win over entity-implied topics. An entity whose type
    /// the current topic already owns keeps the conversation where it is.
    pub fn detect_topic(
        &self,
        tokens: &[String],
        das: &[DaLabel],
        entities: &[LinkedEntity],
        current: Option<&TopicId>,
    ) -> Option<TopicSignal> {
        let navigation = das.iter().any(|d| d.is_navigation());
        if let Some((topic, trigger)) = self.explicit_match(tokens, navigation) {
            return Some(TopicSignal {
                topic,
                invocation: InvocationType::ExplicitName,
                trigger,
            });
        }
        let current_types = current.map(|c| self.owned_types(&self.top_level(c))).unwrap_or_default();
        for e in entities {
            if current_types.contains(&e.entity_type) {
                continue;
            }
            if let Some(topic) = self.entity_to_topic(e) {
                return Some(TopicSignal {
                    topic,
                    invocation: InvocationType::EntityImplied,
                    trigger: e.span,
                });
            }
        }
        None
    }
}
