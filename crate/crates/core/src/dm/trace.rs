use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::constraints::ResponseConstraints;
use super::initiative::InitiativeChoice;
use super::pool::{RemovalReason, RgStatus};
use crate::dialogue_acts::DaLabel;
use crate::nlu::RedFlag;
use crate::topic::TopicSignal;
use crate::types::{SystemAction, TopicId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemovedEntry {
    pub rg: String,
    pub reason: RemovalReason,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NluSummary {
    pub das: Vec<DaLabel>,
    pub entities: Vec<String>,
    pub sentiment: f64,
    pub red_flag: Option<RedFlag>,
    pub topic_signal: Option<TopicSignal>,
    #[serde(default)]
    pub degraded: Vec<String>,
}

/// Everything the engine decided on one turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnTrace {
    pub conversation_id: String,
    pub turn_index: u64,
    pub user_text: String,
    pub nlu: NluSummary,
    pub action: SystemAction,
    pub constraints: ResponseConstraints,
    pub initiative: Option<InitiativeChoice>,
    pub topic_before: TopicId,
    pub topic_after: TopicId,
    pub dispatched: Vec<String>,
    pub rg_status: BTreeMap<String, RgStatus>,
    pub rg_latency_ms: BTreeMap<String, u64>,
    pub pool_raw: usize,
    pub pool_size: usize,
    pub removed: Vec<RemovedEntry>,
    pub masked_bypass: Vec<String>,
    pub chosen_rg: Option<String>,
    pub tier: Option<u8>,
    /// Template id when the turn fell back.
    pub fallback: Option<String>,
    pub fallback_reason: Option<String>,
    pub handover_opener: Option<String>,
    pub ground: Option<String>,
    pub response: String,
    pub latency_ms: u64,
}
