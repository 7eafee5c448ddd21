use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::store::{RelationRegistry, TripleStore};
use super::template::{realize, KgTemplates, Realization, TemplateKind};
use crate::dialogue_acts::DaLabel;
use crate::error::Result;
use crate::rg::{Registration, ResponseGenerator, RgContext, RgOutput, TopicScope, TurnOutcome};
use crate::text;
use crate::types::{join_parts, EntityType, LinkedEntity, ResponseCandidate, SystemAction, TopicId};

/// On-topic turns about one focus before a shift is offered.
pub const SHIFT_AFTER: u32 = 2;
/// Popularity ratio that settles a tie between same-type candidates.
pub const POPULARITY_MARGIN: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FocusResolution {
    Resolved(String),
    Ambiguous(Vec<String>),
    None,
}

/// Picks the linked entity whose type is expected. Several matches resolve
/// only when the most popular is at least twice as popular as the next.
pub fn resolve_focus(entities: &[LinkedEntity], expected: &[EntityType]) -> FocusResolution {
    let mut matching: Vec<&LinkedEntity> = Vec::new();
    for e in entities.iter().filter(|e| expected.contains(&e.entity_type)) {
        if !matching.iter().any(|m| m.uri == e.uri) {
            matching.push(e);
        }
    }
    match matching.len() {
        0 => FocusResolution::None,
        1 => FocusResolution::Resolved(matching[0].uri.clone()),
        _ => {
            matching.sort_by(|a, b| b.popularity.cmp(&a.popularity).then_with(|| a.uri.cmp(&b.uri)));
            let (top, next) = (matching[0].popularity as f64, matching[1].popularity as f64);
            if top >= POPULARITY_MARGIN * next && top > 0.0 {
                FocusResolution::Resolved(matching[0].uri.clone())
            } else {
                FocusResolution::Ambiguous(matching.iter().map(|e| e.uri.clone()).collect())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PendingKind {
    Shift,
    Favorite,
}

/// A proposed focus awaiting the user's consent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pending {
    pub target: String,
    pub kind: PendingKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KgState {
    pub focus: Option<String>,
    pub used: BTreeSet<String>,
    pub on_topic_turns: u32,
    pub pending: Option<Pending>,
    pub visited_favorites: Vec<String>,
}

impl KgState {
    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("kg state serializes")
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<Self> {
        serde_json::from_slice(bytes).ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KgMove {
    OnTopic,
    Shift,
    Favorite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KgReply {
    pub kind: KgMove,
    pub text: String,
    pub focus: String,
    pub opinion: bool,
    pub question: bool,
}

/// Store, relation registry, templates and per-topic favorites.
#[derive(Debug, Clone)]
pub struct KgPack {
    pub store: TripleStore,
    pub relations: RelationRegistry,
    pub templates: KgTemplates,
    pub favorites: BTreeMap<TopicId, Vec<String>>,
}

impl KgPack {
    /// `topic \t uri` rows.
    pub fn parse_favorites(data: &str, file: &str) -> Result<BTreeMap<TopicId, Vec<String>>> {
        let mut out: BTreeMap<TopicId, Vec<String>> = BTreeMap::new();
        for (line_no, line) in text::data_lines(data) {
            let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
            if cols.len() != 2 || cols[1].is_empty() {
                return Err(crate::Error::parse(file, line_no, "expected topic, uri"));
            }
            out.entry(TopicId::new(cols[0])).or_default().push(cols[1].to_string());
        }
        Ok(out)
    }

    fn realize_kind<R: Rng + ?Sized>(
        &self,
        focus: &str,
        kind: TemplateKind,
        favorite_only: bool,
        used: &BTreeSet<String>,
        rng: &mut R,
    ) -> Option<Realization> {
        let ty = self.store.entity_type(focus);
        self.templates
            .relations
            .iter()
            .filter(|t| t.kind == kind && t.applies_to(ty) && (!favorite_only || t.favorite))
            .find_map(|t| {
                realize(
                    &self.store,
                    &self.relations,
                    focus,
                    t,
                    &|k| used.contains(k),
                    &mut |n| rng.random_range(0..n),
                )
            })
    }

    pub fn on_topic<R: Rng + ?Sized>(&self, st: &mut KgState, rng: &mut R) -> Option<KgReply> {
        let focus = st.focus.clone()?;
        let r = self.realize_kind(&focus, TemplateKind::OnTopic, false, &st.used, rng)?;
        st.used.insert(r.key.clone());
        st.on_topic_turns += 1;
        Some(KgReply {
            kind: KgMove::OnTopic,
            text: join_parts([Some(r.text.as_str()), r.question.as_deref()]),
            focus,
            opinion: r.opinion,
            question: r.question.is_some(),
        })
    }

    pub fn shift<R: Rng + ?Sized>(&self, st: &mut KgState, rng: &mut R) -> Option<KgReply> {
        let focus = st.focus.clone()?;
        let r = self.realize_kind(&focus, TemplateKind::Shift, false, &st.used, rng)?;
        st.used.insert(r.key.clone());
        let target = r.target.clone().expect("shift realizations carry a target");
        st.pending = Some(Pending {
            target,
            kind: PendingKind::Shift,
        });
        Some(KgReply {
            kind: KgMove::Shift,
            text: join_parts([Some(r.text.as_str()), r.question.as_deref()]),
            focus,
            opinion: false,
            question: true,
        })
    }

    pub fn favorite<R: Rng + ?Sized>(&self, topic: &TopicId, st: &mut KgState, rng: &mut R) -> Option<KgReply> {
        let candidates = self.favorites.get(topic)?;
        for fav in candidates {
            if st.visited_favorites.contains(fav) || st.focus.as_deref() == Some(fav.as_str()) {
                continue;
            }
            if !self.store.contains_entity(fav) {
                log::warn!("favorite `{fav}` is not in the knowledge graph");
                continue;
            }
            st.visited_favorites.push(fav.clone());
            let fact = self
                .realize_kind(fav, TemplateKind::OnTopic, true, &st.used, rng)
                .or_else(|| self.realize_kind(fav, TemplateKind::OnTopic, false, &st.used, rng));
            let mut slots = super::template::base_slots(&self.store, fav);
            let plural = self
                .store
                .entity_type(fav)
                .and_then(|t| self.templates.type_plurals.get(&t).cloned())
                .unwrap_or_else(|| "people".to_string());
            slots.insert("type_plural".to_string(), plural);
            let pick = |xs: &[String], rng: &mut R| xs[rng.random_range(0..xs.len())].clone();
            let intro = text::fill_slots(&pick(&self.templates.favorite_intro, rng), &slots)?;
            let question = text::fill_slots(&pick(&self.templates.favorite_question, rng), &slots)?;
            let mut parts = vec![intro];
            if let Some(f) = fact {
                st.used.insert(f.key.clone());
                parts.push(f.text);
            }
            parts.push(question);
            st.pending = Some(Pending {
                target: fav.clone(),
                kind: PendingKind::Favorite,
            });
            return Some(KgReply {
                kind: KgMove::Favorite,
                text: parts.join(" "),
                focus: fav.clone(),
                opinion: false,
                question: true,
            });
        }
        None
    }

    /// One KG turn. Consent is required before a proposed focus is adopted.
    pub fn turn<R: Rng + ?Sized>(
        &self,
        topic: &TopicId,
        expected: &[EntityType],
        entities: &[LinkedEntity],
        das: &[DaLabel],
        state: &KgState,
        rng: &mut R,
    ) -> Option<(KgReply, KgState)> {
        let mut st = state.clone();
        let user_focus = match resolve_focus(entities, expected) {
            FocusResolution::Resolved(uri) if self.store.contains_entity(&uri) => Some(uri),
            _ => None,
        };
        let order: &[KgMove] = if let Some(uri) = user_focus.filter(|u| st.focus.as_ref() != Some(u)) {
            st.focus = Some(uri);
            st.on_topic_turns = 0;
            st.pending = None;
            &[KgMove::OnTopic, KgMove::Shift, KgMove::Favorite]
        } else if let Some(p) = st.pending.take() {
            if das.contains(&DaLabel::YesAnswer) {
                st.focus = Some(p.target);
                st.on_topic_turns = 0;
                &[KgMove::OnTopic, KgMove::Shift, KgMove::Favorite]
            } else {
                &[KgMove::Favorite]
            }
        } else if st.focus.is_some() && st.on_topic_turns >= SHIFT_AFTER {
            &[KgMove::Shift, KgMove::OnTopic, KgMove::Favorite]
        } else if st.focus.is_some() {
            &[KgMove::OnTopic, KgMove::Shift, KgMove::Favorite]
        } else {
            &[KgMove::Favorite]
        };
        for m in order {
            let reply = match m {
                KgMove::OnTopic => self.on_topic(&mut st, rng),
                KgMove::Shift => self.shift(&mut st, rng),
                KgMove::Favorite => self.favorite(topic, &mut st, rng),
            };
            if let Some(r) = reply {
                return Some((r, st));
            }
        }
        None
    }
}

pub struct KgRg {
    pack: Arc<KgPack>,
    topics: BTreeSet<TopicId>,
}

impl KgRg {
    pub const ID: &'static str = "kg";

    pub fn new(pack: Arc<KgPack>, topics: impl IntoIterator<Item = TopicId>) -> Self {
        KgRg {
            pack,
            topics: topics.into_iter().collect(),
        }
    }
}

impl ResponseGenerator for KgRg {
    fn id(&self) -> &str {
        Self::ID
    }

    fn registration(&self) -> Registration {
        Registration::new(
            [SystemAction::Converse, SystemAction::TopicChange],
            TopicScope::Only(self.topics.clone()),
        )
    }

    fn respond(&self, ctx: &RgContext) -> Result<RgOutput> {
        let state = ctx.rg_state(Self::ID).and_then(KgState::from_bytes).unwrap_or_default();
        let topic = &ctx.constraints.topic;
        let expected = ctx.topics.owned_types(topic);
        // on entering a topic the KG only speaks about something the user named
        if ctx.is_topic_entry() && resolve_focus(&ctx.nlu.entities, &expected) == FocusResolution::None {
            return Ok(RgOutput::none());
        }
        let mut rng = ctx.rng(Self::ID);
        let Some((reply, next)) = self.pack.turn(topic, &expected, &ctx.nlu.entities, &ctx.nlu.das(), &state, &mut rng)
        else {
            return Ok(RgOutput::none());
        };
        let da = if reply.opinion {
            DaLabel::Opinion
        } else if reply.question {
            DaLabel::OpinionQuestion
        } else {
            DaLabel::StatementNonOpinion
        };
        let mut c = ResponseCandidate::new(Self::ID, topic.clone(), reply.text)
            .with_da(da)
            .with_entities([reply.focus])
            .with_state(next.to_bytes());
        if reply.kind == KgMove::OnTopic {
            c = c.factual();
        }
        Ok(RgOutput::one(c))
    }

    fn observe(&self, state: &[u8], outcome: &TurnOutcome) -> Option<Vec<u8>> {
        if outcome.chosen_rg.as_deref() == Some(Self::ID) {
            return None;
        }
        let mut s = KgState::from_bytes(state)?;
        s.pending.take()?;
        Some(s.to_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{EntitySource, Span};

    fn ent(uri: &str, ty: EntityType, pop: u64) -> LinkedEntity {
        LinkedEntity {
            span: Span::new(0, 2),
            surface: uri.to_lowercase().replace('_', " "),
            uri: uri.into(),
            entity_type: ty,
            score: 2.0,
            source: EntitySource::Ensemble,
            gender: None,
            summary: None,
            popularity: pop,
        }
    }

    #[test]
    fn focus_uses_expected_type() {
        let es = [
            ent("Chris_Evans_(politician)", EntityType::Other, 10),
            ent("Chris_Evans_(actor)", EntityType::Actor, 5),
        ];
        assert_eq!(
            resolve_focus(&es, &[EntityType::Actor]),
            FocusResolution::Resolved("Chris_Evans_(actor)".into())
        );
        assert_eq!(resolve_focus(&es, &[EntityType::Song]), FocusResolution::None);
    }

    #[test]
    fn popularity_margin() {
        let clear = [ent("A", EntityType::Actor, 20), ent("B", EntityType::Actor, 10)];
        assert_eq!(resolve_focus(&clear, &[EntityType::Actor]), FocusResolution::Resolved("A".into()));
        let close = [ent("A", EntityType::Actor, 19), ent("B", EntityType::Actor, 10)];
        assert!(matches!(resolve_focus(&close, &[EntityType::Actor]), FocusResolution::Ambiguous(_)));
    }
}
