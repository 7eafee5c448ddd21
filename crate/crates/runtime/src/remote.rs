//! Response generators hosted behind HTTP.
//!
//! The engine POSTs a [`RemoteRequest`] and expects a [`RemoteReply`]. Any
//! failure (refused connection, timeout, bad status, bad body) yields no
//! candidates and a warning in the log; the turn goes on without the RG.

use std::time::Duration;

use parley_core::dialogue_acts::DaLabel;
use parley_core::dm::ResponseConstraints;
use parley_core::pack::RemoteRgConfig;
use parley_core::rg::{Registration, ResponseGenerator, RgContext, RgOutput, TopicScope};
use parley_core::types::{ResponseCandidate, SystemAction, TopicId};
use serde::{Deserialize, Serialize};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_millis(300);

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RemoteRequest {
    pub conversation_id: String,
    pub turn_index: u64,
    pub user_text: String,
    pub action: SystemAction,
    pub constraints: ResponseConstraints,
    pub dialogue_acts: Vec<DaLabel>,
    pub entities: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RemoteCandidate {
    pub body: String,
    #[serde(default)]
    pub opener: Option<String>,
    #[serde(default)]
    pub handoff: Option<String>,
    #[serde(default)]
    pub dialogue_act: Option<DaLabel>,
    #[serde(default)]
    pub entities: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RemoteReply {
    pub candidates: Vec<RemoteCandidate>,
}

pub struct RemoteRg {
    id: String,
    endpoint: String,
    registration: Registration,
    agent: ureq::Agent,
}

impl RemoteRg {
    pub fn new(id: impl Into<String>, endpoint: impl Into<String>, registration: Registration, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        RemoteRg {
            id: id.into(),
            endpoint: endpoint.into(),
            registration,
            agent,
        }
    }

    pub fn from_config(cfg: &RemoteRgConfig) -> Self {
        let topics = if cfg.topics.is_empty() {
            TopicScope::Any
        } else {
            TopicScope::Only(cfg.topics.iter().cloned().collect())
        };
        let timeout = cfg.timeout_ms.map_or(DEFAULT_TIMEOUT, Duration::from_millis);
        Self::new(&cfg.id, &cfg.endpoint, Registration::new(cfg.actions.iter().copied(), topics), timeout)
    }

    /// One round trip. `None` on any failure.
    pub fn call(&self, req: &RemoteRequest) -> Option<RemoteReply> {
        let mut resp = match self.agent.post(&self.endpoint).send_json(req) {
            Ok(r) => r,
            Err(e) => {
                log::warn!("remote rg `{}`: {e}", self.id);
                return None;
            }
        };
        match resp.body_mut().read_json::<RemoteReply>() {
            Ok(r) => Some(r),
            Err(e) => {
                log::warn!("remote rg `{}` sent a malformed reply: {e}", self.id);
                None
            }
        }
    }
}

pub fn to_candidates(rg: &str, topic: &TopicId, reply: RemoteReply) -> Vec<ResponseCandidate> {
    reply
        .candidates
        .into_iter()
        .filter(|c| !c.body.trim().is_empty())
        .map(|c| {
            let mut cand = ResponseCandidate::new(rg, topic.clone(), c.body).with_entities(c.entities);
            if let Some(o) = c.opener {
                cand = cand.with_opener(o);
            }
            if let Some(h) = c.handoff {
                cand = cand.with_handoff(h);
            }
            if let Some(da) = c.dialogue_act {
                cand = cand.with_da(da);
            }
            cand
        })
        .collect()
}

impl ResponseGenerator for RemoteRg {
    fn id(&self) -> &str {
        &self.id
    }

    fn registration(&self) -> Registration {
        self.registration.clone()
    }

    fn respond(&self, ctx: &RgContext) -> parley_core::Result<RgOutput> {
        let req = RemoteRequest {
            conversation_id: ctx.turn.conversation_id.clone(),
            turn_index: ctx.turn.turn_index,
            user_text: ctx.turn.user_text.clone(),
            action: ctx.action,
            constraints: ctx.constraints.clone(),
            dialogue_acts: ctx.nlu.das(),
            entities: ctx.nlu.entity_uris(),
        };
        let candidates = self
            .call(&req)
            .map(|r| to_candidates(&self.id, &ctx.constraints.topic, r))
            .unwrap_or_default();
        Ok(RgOutput {
            candidates,
            ..RgOutput::none()
        })
    }
}
