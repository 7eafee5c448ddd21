//! Dialogue-act schema and the ensemble tagger.
//!
//! Three members vote on every utterance segment: a regex tagger driven by a
//! pattern file, an averaged-perceptron classifier over padded word 2/3/4-grams,
//! and a handful of rule intents. [`ensemble_combine`] merges them with regex
//! precedence.

mod ensemble;
mod ngram;
mod regex_tagger;

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use ensemble::{ensemble_combine, heuristic_intents, DaTagger};
pub use ngram::{ngram_features, parse_da_corpus, tag_ngram, train_ngram, NgramModel, TrainConfig};
pub use regex_tagger::{RegexTagger, TaggedLabel};

/// Closed dialogue-act label set. Unknown names parse to
/// [`DaLabel::StatementNonOpinion`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DaLabel {
    MoreInformation,
    ChangeTopic,
    AvoidTopic,
    DiscussTopic,
    SignalNonUnderstanding,
    PersonalQuestion,
    ExperienceQuestion,
    RequestOptions,
    AdviceQuestion,
    FactQuestion,
    NoAnswer,
    YesAnswer,
    Acknowledgement,
    Apology,
    Complaint,
    ConversationClosing,
    Opinion,
    Command,
    Comment,
    StatementNonOpinion,
    OpinionQuestion,
    Greeting,
}

impl DaLabel {
    pub const ALL: [DaLabel; 22] = [
        DaLabel::MoreInformation,
        DaLabel::ChangeTopic,
        DaLabel::AvoidTopic,
        DaLabel::DiscussTopic,
        DaLabel::SignalNonUnderstanding,
        DaLabel::PersonalQuestion,
        DaLabel::ExperienceQuestion,
        DaLabel::RequestOptions,
        DaLabel::AdviceQuestion,
        DaLabel::FactQuestion,
        DaLabel::NoAnswer,
        DaLabel::YesAnswer,
        DaLabel::Acknowledgement,
        DaLabel::Apology,
        DaLabel::Complaint,
        DaLabel::ConversationClosing,
        DaLabel::Opinion,
        DaLabel::Command,
        DaLabel::Comment,
        DaLabel::StatementNonOpinion,
        DaLabel::OpinionQuestion,
        DaLabel::Greeting,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DaLabel::MoreInformation => "more-information",
            DaLabel::ChangeTopic => "change-topic",
            DaLabel::AvoidTopic => "avoid-topic",
            DaLabel::DiscussTopic => "discuss-topic",
            DaLabel::SignalNonUnderstanding => "signal-non-understanding",
            DaLabel::PersonalQuestion => "personal-question",
            DaLabel::ExperienceQuestion => "experience-question",
            DaLabel::RequestOptions => "request-options",
            DaLabel::AdviceQuestion => "advice-question",
            DaLabel::FactQuestion => "fact-question",
            DaLabel::NoAnswer => "no-answer",
            DaLabel::YesAnswer => "yes-answer",
            DaLabel::Acknowledgement => "acknowledgement",
            DaLabel::Apology => "apology",
            DaLabel::Complaint => "complaint",
            DaLabel::ConversationClosing => "conversation-closing",
            DaLabel::Opinion => "opinion",
            DaLabel::Command => "command",
            DaLabel::Comment => "comment",
            DaLabel::StatementNonOpinion => "statement-non-opinion",
            DaLabel::OpinionQuestion => "opinion-question",
            DaLabel::Greeting => "greeting",
        }
    }

    /// Strict parse; `None` for names outside the schema.
    pub fn parse_known(name: &str) -> Option<DaLabel> {
        let norm = name.trim().to_lowercase().replace('_', "-");
        DaLabel::ALL.iter().copied().find(|l| l.as_str() == norm)
    }

    /// Navigation acts: the user steering the topic.
    pub fn is_navigation(self) -> bool {
        matches!(
            self,
            DaLabel::ChangeTopic | DaLabel::AvoidTopic | DaLabel::DiscussTopic
        )
    }

    pub fn is_question(self) -> bool {
        matches!(
            self,
            DaLabel::PersonalQuestion
                | DaLabel::ExperienceQuestion
                | DaLabel::AdviceQuestion
                | DaLabel::FactQuestion
                | DaLabel::OpinionQuestion
        )
    }

    /// Labels sorted by name; this is the tie-break order everywhere.
    pub fn lexicographic() -> Vec<DaLabel> {
        let mut all = DaLabel::ALL.to_vec();
        all.sort();
        all
    }

    pub fn index(self) -> usize {
        DaLabel::ALL.iter().position(|l| *l == self).unwrap()
    }
}

impl PartialOrd for DaLabel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for DaLabel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.as_str().cmp(other.as_str())
    }
}

impl fmt::Display for DaLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DaLabel {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(DaLabel::parse_known(s).unwrap_or(DaLabel::StatementNonOpinion))
    }
}

impl Serialize for DaLabel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for DaLabel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        DaLabel::parse_known(&s)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown dialogue act `{s}`")))
    }
}
