//! Domain types shared by every pipeline stage.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dialogue_acts::DaLabel;
use crate::text;

/// One user turn as received from the transport. `user_text` is treated like
/// raw ASR output: no casing or punctuation guarantees.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub conversation_id: String,
    pub turn_index: u64,
    pub user_text: String,
    /// Engine-assigned, milliseconds since the epoch.
    pub timestamp: u64,
}

/// Topic identifier, e.g. `sports` or `harry_potter`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TopicId(pub String);

impl TopicId {
    pub fn new(id: impl Into<String>) -> Self {
        TopicId(id.into())
    }

    pub fn introduction() -> Self {
        TopicId::new("introduction")
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Human-readable name, `comic_books` -> `comic books`.
    pub fn display_name(&self) -> String {
        self.0.replace('_', " ")
    }
}

impl fmt::Display for TopicId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for TopicId {
    fn from(s: &str) -> Self {
        TopicId::new(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EntityType {
    Actor,
    Album,
    Book,
    Director,
    Movie,
    MusicalAct,
    Musician,
    Song,
    TvSeries,
    SportsPlayer,
    SportsTeam,
    Other,
}

impl EntityType {
    pub const ALL: [EntityType; 12] = [
        EntityType::Actor,
        EntityType::Album,
        EntityType::Book,
        EntityType::Director,
        EntityType::Movie,
        EntityType::MusicalAct,
        EntityType::Musician,
        EntityType::Song,
        EntityType::TvSeries,
        EntityType::SportsPlayer,
        EntityType::SportsTeam,
        EntityType::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityType::Actor => "Actor",
            EntityType::Album => "Album",
            EntityType::Book => "Book",
            EntityType::Director => "Director",
            EntityType::Movie => "Movie",
            EntityType::MusicalAct => "MusicalAct",
            EntityType::Musician => "Musician",
            EntityType::Song => "Song",
            EntityType::TvSeries => "TvSeries",
            EntityType::SportsPlayer => "SportsPlayer",
            EntityType::SportsTeam => "SportsTeam",
            EntityType::Other => "Other",
        }
    }

    pub fn parse(name: &str) -> Option<EntityType> {
        EntityType::ALL
            .iter()
            .copied()
            .find(|t| t.as_str().eq_ignore_ascii_case(name.trim()))
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Female,
    Male,
    Other,
}

impl Gender {
    pub fn parse(name: &str) -> Option<Gender> {
        match name.trim().to_lowercase().as_str() {
            "female" | "f" => Some(Gender::Female),
            "male" | "m" => Some(Gender::Male),
            "other" | "x" => Some(Gender::Other),
            _ => None,
        }
    }

    pub fn subject_pronoun(self) -> &'static str {
        match self {
            Gender::Female => "she",
            Gender::Male => "he",
            Gender::Other => "they",
        }
    }
}

/// Half-open token range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntitySource {
    Ensemble,
    Trained,
}

/// A mention linked to its canonical id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkedEntity {
    pub span: Span,
    pub surface: String,
    pub uri: String,
    pub entity_type: EntityType,
    pub score: f64,
    pub source: EntitySource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gender: Option<Gender>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
    #[serde(default)]
    pub popularity: u64,
}

impl LinkedEntity {
    /// The surface form as it should be spoken. Uses the canonical casing
    /// when the surface names the entity in full.
    pub fn spoken(&self) -> String {
        let canonical = self.uri.split("_(").next().unwrap_or(&self.uri).replace('_', " ");
        if canonical.eq_ignore_ascii_case(&self.surface) {
            canonical
        } else {
            text::title_case(&self.surface)
        }
    }
}

/// A DA-bearing piece of the user utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceSegment {
    pub text: String,
    pub span: Span,
    pub da_labels: Vec<(DaLabel, f64)>,
}

impl UtteranceSegment {
    pub fn tokens(&self) -> Vec<String> {
        text::tokenize(&self.text)
    }

    pub fn primary_da(&self) -> Option<DaLabel> {
        self.da_labels.first().map(|(l, _)| *l)
    }
}

/// The action table. Every turn yields exactly one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemAction {
    PerformRepeat,
    ConvClosing,
    AdviseUsage,
    Greet,
    RepeatRequest,
    WaitPrompting,
    RedResponse,
    TopicChange,
    ListOptions,
    Converse,
}

impl SystemAction {
    pub const ALL: [SystemAction; 10] = [
        SystemAction::PerformRepeat,
        SystemAction::ConvClosing,
        SystemAction::AdviseUsage,
        SystemAction::Greet,
        SystemAction::RepeatRequest,
        SystemAction::WaitPrompting,
        SystemAction::RedResponse,
        SystemAction::TopicChange,
        SystemAction::ListOptions,
        SystemAction::Converse,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SystemAction::PerformRepeat => "perform_repeat",
            SystemAction::ConvClosing => "conv_closing",
            SystemAction::AdviseUsage => "advise_usage",
            SystemAction::Greet => "greet",
            SystemAction::RepeatRequest => "repeat_request",
            SystemAction::WaitPrompting => "wait_prompting",
            SystemAction::RedResponse => "red_response",
            SystemAction::TopicChange => "topic_change",
            SystemAction::ListOptions => "list_options",
            SystemAction::Converse => "converse",
        }
    }

    pub fn parse(name: &str) -> Option<SystemAction> {
        SystemAction::ALL
            .iter()
            .copied()
            .find(|a| a.as_str() == name.trim())
    }
}

impl fmt::Display for SystemAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A candidate reply from one response generator, already split into parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseCandidate {
    pub rg: String,
    #[serde(default)]
    pub opener: Option<String>,
    pub body: String,
    #[serde(default)]
    pub handoff: Option<String>,
    pub topic: TopicId,
    #[serde(default)]
    pub entities: Vec<String>,
    #[serde(default)]
    pub dialogue_act: Option<DaLabel>,
    /// Long factual content: eligible for speech-rate reduction.
    #[serde(default)]
    pub factual: bool,
    #[serde(default)]
    pub excited: bool,
    /// RG-private state to persist if this candidate is selected.
    #[serde(skip)]
    pub rg_state: Option<Vec<u8>>,
}

impl ResponseCandidate {
    pub fn new(rg: impl Into<String>, topic: TopicId, body: impl Into<String>) -> Self {
        ResponseCandidate {
            rg: rg.into(),
            opener: None,
            body: body.into(),
            handoff: None,
            topic,
            entities: Vec::new(),
            dialogue_act: None,
            factual: false,
            excited: false,
            rg_state: None,
        }
    }

    pub fn with_opener(mut self, opener: impl Into<String>) -> Self {
        self.opener = Some(opener.into()).filter(|s: &String| !s.trim().is_empty());
        self
    }

    pub fn with_handoff(mut self, handoff: impl Into<String>) -> Self {
        self.handoff = Some(handoff.into()).filter(|s: &String| !s.trim().is_empty());
        self
    }

    pub fn with_da(mut self, da: DaLabel) -> Self {
        self.dialogue_act = Some(da);
        self
    }

    pub fn with_entities(mut self, uris: impl IntoIterator<Item = String>) -> Self {
        self.entities.extend(uris);
        self
    }

    pub fn with_state(mut self, state: Vec<u8>) -> Self {
        self.rg_state = Some(state);
        self
    }

    pub fn factual(mut self) -> Self {
        self.factual = true;
        self
    }

    /// Parts joined in display order.
    pub fn text(&self) -> String {
        join_parts([self.opener.as_deref(), Some(self.body.as_str()), self.handoff.as_deref()])
    }
}

/// Joins optional parts with single spaces, skipping absent or blank ones.
pub fn join_parts<'a>(parts: impl IntoIterator<Item = Option<&'a str>>) -> String {
    parts
        .into_iter()
        .flatten()
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

/// The assembled system turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemResponse {
    pub ground: Option<String>,
    pub opener: Option<String>,
    pub body: String,
    pub handoff: Option<String>,
    pub source_rg: String,
    pub ssml: Option<String>,
}

impl SystemResponse {
    /// ground, opener, body, hand-off joined by single spaces.
    pub fn text(&self) -> String {
        join_parts([
            self.ground.as_deref(),
            self.opener.as_deref(),
            Some(self.body.as_str()),
            self.handoff.as_deref(),
        ])
    }

    /// Everything after the ground; used for repetition checks.
    pub fn content(&self) -> String {
        join_parts([
            self.opener.as_deref(),
            Some(self.body.as_str()),
            self.handoff.as_deref(),
        ])
    }
}
