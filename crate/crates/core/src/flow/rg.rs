use std::sync::Arc;

use super::callbacks::CallbackRegistry;
use super::exec::{observe_foreign, step, FlowState, StepInput};
use super::graph::FlowGraph;
use crate::error::Result;
use crate::rg::{Registration, ResponseGenerator, RgContext, RgOutput, TopicScope, TurnOutcome};
use crate::types::{ResponseCandidate, SystemAction};

/// A response generator driven by one authored flow graph.
pub struct FlowRg {
    id: String,
    graph: Arc<FlowGraph>,
    callbacks: CallbackRegistry,
}

impl FlowRg {
    pub fn new(graph: Arc<FlowGraph>, callbacks: CallbackRegistry) -> Self {
        FlowRg {
            id: format!("flow:{}", graph.id),
            graph,
            callbacks,
        }
    }

    pub fn graph(&self) -> &FlowGraph {
        &self.graph
    }
}

impl ResponseGenerator for FlowRg {
    fn id(&self) -> &str {
        &self.id
    }

    fn registration(&self) -> Registration {
        Registration::new(
            [SystemAction::Converse, SystemAction::TopicChange],
            TopicScope::Only([self.graph.topic.clone()].into()),
        )
    }

    fn respond(&self, ctx: &RgContext) -> Result<RgOutput> {
        let state = ctx
            .rg_state(&self.id)
            .and_then(FlowState::from_bytes)
            .unwrap_or_default();
        let das = ctx.nlu.das();
        let input = StepInput {
            das: &das,
            initiative: ctx.initiative,
            tokens: &ctx.nlu.tokens,
            entities: &ctx.nlu.entities,
        };
        let mut rng = ctx.rng(&self.id);
        let r = step(&self.graph, &self.callbacks, &state, &input, &mut rng);
        let bytes = r.state.to_bytes();
        let candidates: Vec<ResponseCandidate> = r
            .candidates
            .into_iter()
            .map(|c| {
                let (opener, body) = if c.body.is_empty() {
                    (String::new(), c.opener)
                } else {
                    (c.opener, c.body)
                };
                let mut cand = ResponseCandidate::new(&self.id, self.graph.topic.clone(), body)
                    .with_opener(opener)
                    .with_handoff(c.handoff)
                    .with_entities(r.entities.clone())
                    .with_state(bytes.clone());
                if let Some(da) = r.da {
                    cand = cand.with_da(da);
                }
                cand
            })
            .collect();
        let state_if_unchosen = candidates.is_empty().then_some(bytes);
        Ok(RgOutput {
            candidates,
            handover_opener: r.handover_opener,
            state_if_unchosen,
        })
    }

    fn observe(&self, state: &[u8], outcome: &TurnOutcome) -> Option<Vec<u8>> {
        if outcome.chosen_rg.as_deref() == Some(self.id.as_str()) {
            return None;
        }
        let s = FlowState::from_bytes(state)?;
        let next = observe_foreign(&s);
        (next != s).then(|| next.to_bytes())
    }
}
