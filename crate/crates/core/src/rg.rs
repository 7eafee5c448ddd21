//! The contract between the dialogue manager and response generators.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dm::constraints::ResponseConstraints;
use crate::error::Result;
use crate::nlu::NluBundle;
use crate::state::{seeded_rng, DialogueState};
use crate::topic::TopicRegistry;
use crate::types::{ResponseCandidate, SystemAction, TopicId, Turn};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopicScope {
    Any,
    Only(BTreeSet<TopicId>),
}

/// The (action, topic) pairs an RG answers for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Registration {
    pub actions: BTreeSet<SystemAction>,
    pub topics: TopicScope,
    #[serde(default)]
    pub always_run: bool,
}

impl Registration {
    pub fn new(actions: impl IntoIterator<Item = SystemAction>, topics: TopicScope) -> Self {
        Registration {
            actions: actions.into_iter().collect(),
            topics,
            always_run: false,
        }
    }

    pub fn for_topics<'a>(
        actions: impl IntoIterator<Item = SystemAction>,
        topics: impl IntoIterator<Item = &'a str>,
    ) -> Self {
        Self::new(actions, TopicScope::Only(topics.into_iter().map(TopicId::new).collect()))
    }

    pub fn always() -> Self {
        Registration {
            actions: BTreeSet::new(),
            topics: TopicScope::Any,
            always_run: true,
        }
    }

    pub fn covers(&self, action: SystemAction, topic: &TopicId) -> bool {
        self.actions.contains(&action)
            && match &self.topics {
                TopicScope::Any => true,
                TopicScope::Only(set) => set.contains(topic),
            }
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
            || match &self.topics {
                TopicScope::Any => false,
                TopicScope::Only(set) => set.is_empty(),
            }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Initiative {
    System,
    User,
}

/// Everything an RG may read for one turn. Shared by all RGs of the turn.
#[derive(Debug, Clone)]
pub struct RgContext {
    pub turn: Turn,
    pub action: SystemAction,
    pub constraints: ResponseConstraints,
    pub nlu: NluBundle,
    pub state: DialogueState,
    pub topics: Arc<TopicRegistry>,
    pub initiative: Initiative,
    pub turn_seed: u64,
}

impl RgContext {
    pub fn rg_state(&self, rg: &str) -> Option<&[u8]> {
        self.state.rg_blob(rg)
    }

    /// An RNG stream private to one RG for this turn.
    pub fn rng(&self, rg: &str) -> ChaCha8Rng {
        seeded_rng(self.turn_seed, rg)
    }

    /// Whether this RG produced the previous system turn.
    pub fn spoke_last(&self, rg: &str) -> bool {
        self.state.last_response().is_some_and(|r| r.source_rg == rg)
    }

    pub fn is_topic_entry(&self) -> bool {
        self.constraints.new_topic_flag
    }
}

/// What one RG returns for a turn.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RgOutput {
    pub candidates: Vec<ResponseCandidate>,
    /// Closing words of something the RG just finished, offered as the
    /// opener of whatever response is chosen.
    pub handover_opener: Option<String>,
    /// State to persist when none of this RG's candidates is chosen.
    pub state_if_unchosen: Option<Vec<u8>>,
}

impl RgOutput {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn one(c: ResponseCandidate) -> Self {
        RgOutput {
            candidates: vec![c],
            ..Default::default()
        }
    }
}

/// What happened on a turn, reported back to RGs that hold state.
#[derive(Debug, Clone, PartialEq)]
pub struct TurnOutcome {
    pub turn_index: u64,
    pub action: SystemAction,
    pub topic: TopicId,
    pub chosen_rg: Option<String>,
}

pub trait ResponseGenerator: Send + Sync {
    fn id(&self) -> &str;

    fn registration(&self) -> Registration;

    fn respond(&self, ctx: &RgContext) -> Result<RgOutput>;

    /// Called after every turn with this RG's stored state. Returning bytes
    /// replaces the state.
    fn observe(&self, _state: &[u8], _outcome: &TurnOutcome) -> Option<Vec<u8>> {
        None
    }
}
