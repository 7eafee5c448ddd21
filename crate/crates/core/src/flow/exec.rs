use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::callbacks::{CallbackContext, CallbackRegistry};
use super::compose::{compose, segment_options, Composed};
use super::graph::{FlowGraph, FlowNode, Ordering};
use crate::dialogue_acts::DaLabel;
use crate::rg::Initiative;
use crate::types::{join_parts, LinkedEntity};

/// Turns another RG may hold the floor before a suspended node is dropped.
pub const MAX_FOREIGN_TURNS: u32 = 2;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowState {
    /// Node whose response was last given, awaiting the user's reply.
    pub current: Option<String>,
    pub visits: BTreeMap<String, u32>,
    /// Miniflows in the order they were entered.
    pub visited_miniflows: Vec<String>,
    /// Turns since this flow last spoke while `current` is set.
    pub foreign_turns: u32,
}

impl FlowState {
    pub fn visits(&self, node: &str) -> u32 {
        self.visits.get(node).copied().unwrap_or(0)
    }

    pub fn miniflow_visited(&self, id: &str) -> bool {
        self.visited_miniflows.iter().any(|m| m == id)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("flow state serializes")
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<Self> {
        serde_json::from_slice(bytes).ok()
    }
}

pub struct StepInput<'a> {
    pub das: &'a [DaLabel],
    pub initiative: Initiative,
    pub tokens: &'a [String],
    pub entities: &'a [LinkedEntity],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepEvent {
    Entered(String),
    Moved(String),
    Exit(String),
    Leaf(String),
    /// A node's callback failed and its candidates were dropped.
    Dropped(String),
    /// No edge applied; the miniflow ended.
    NoEdge(String),
    Exhausted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub candidates: Vec<Composed>,
    pub node: Option<String>,
    pub da: Option<DaLabel>,
    pub entities: Vec<String>,
    pub handover_opener: Option<String>,
    /// State to keep if one of the candidates is spoken.
    pub state: FlowState,
    pub events: Vec<StepEvent>,
}

enum EdgeChoice {
    Target(String),
    Exit(String),
    End,
}

struct Step<'a, R: Rng + ?Sized> {
    graph: &'a FlowGraph,
    callbacks: &'a CallbackRegistry,
    input: &'a StepInput<'a>,
    rng: &'a mut R,
    state: FlowState,
    prefix: Vec<String>,
    events: Vec<StepEvent>,
}

impl<'a, R: Rng + ?Sized> Step<'a, R> {
    fn capped(&self, node: &FlowNode) -> bool {
        self.state.visits(&node.id) >= self.graph.cap(node)
    }

    fn ctx(&self) -> CallbackContext<'a> {
        CallbackContext {
            tokens: self.input.tokens,
            entities: self.input.entities,
            knowledge: &self.graph.knowledge,
        }
    }

    fn choose_edge(&mut self, node: &FlowNode) -> EdgeChoice {
        let matching: Vec<&str> = node
            .edges
            .iter()
            .filter(|e| e.matches(self.input.das))
            .map(|e| e.target.as_str())
            .collect();
        let default: Vec<&str> = node
            .edges
            .iter()
            .filter(|e| e.is_default())
            .map(|e| e.target.as_str())
            .collect();
        for tier in [&matching, &default] {
            let open: Vec<&str> = tier
                .iter()
                .copied()
                .filter(|t| !self.capped(self.graph.node(t).expect("validated")))
                .collect();
            if let Some(t) = open.choose(self.rng) {
                return EdgeChoice::Target(t.to_string());
            }
        }
        matching
            .iter()
            .chain(default.iter())
            .find(|t| self.graph.node(t).is_some_and(|n| n.exit.is_some()))
            .map_or(EdgeChoice::End, |t| EdgeChoice::Exit(t.to_string()))
    }

    fn mark(&mut self, node: &FlowNode) {
        *self.state.visits.entry(node.id.clone()).or_default() += 1;
        let mf = self.graph.miniflow_of(&node.id).expect("validated").id.clone();
        if !self.state.miniflow_visited(&mf) {
            self.state.visited_miniflows.push(mf);
        }
    }

    fn next_miniflow(&mut self, preferred: Option<&str>) -> Option<StepResult> {
        let unvisited: Vec<&str> = self
            .graph
            .miniflows
            .iter()
            .map(|m| m.id.as_str())
            .filter(|m| !self.state.miniflow_visited(m))
            .collect();
        let pick = match preferred.filter(|p| unvisited.contains(p)) {
            Some(p) => Some(p),
            None => match self.graph.ordering {
                Ordering::Sequential => unvisited.first().copied(),
                Ordering::Random => unvisited.choose(self.rng).copied(),
            },
        };
        match pick {
            Some(mf) => {
                let root = self.graph.miniflow(mf).expect("listed").root.clone();
                self.events.push(StepEvent::Entered(mf.to_string()));
                let node = self.graph.node(&root).expect("validated");
                if self.capped(node) {
                    // mark the miniflow so the search terminates
                    if !self.state.miniflow_visited(mf) {
                        self.state.visited_miniflows.push(mf.to_string());
                    }
                    return self.next_miniflow(None);
                }
                self.emit(&root)
            }
            None => {
                self.state.current = None;
                self.events.push(StepEvent::Exhausted);
                None
            }
        }
    }

    fn options(&mut self, node: &FlowNode, segments: &[super::graph::SegmentSpec]) -> Vec<Composed> {
        let ctx = self.ctx();
        match segment_options(segments, self.callbacks, &ctx) {
            Some(o) => compose(&o, self.rng),
            None => {
                self.events.push(StepEvent::Dropped(node.id.clone()));
                Vec::new()
            }
        }
    }

    /// Speaks `id`. Leaves hand their text to the next miniflow.
    fn emit(&mut self, id: &str) -> Option<StepResult> {
        let node = self.graph.node(id).expect("validated");
        let composed = self.options(node, &node.segments);
        if composed.is_empty() {
            return None;
        }
        self.mark(node);
        if node.leaf {
            self.events.push(StepEvent::Leaf(node.id.clone()));
            let c = composed.choose(self.rng).expect("non-empty");
            self.prefix.push(c.text());
            self.state.current = None;
            return self.next_miniflow(node.leaf_target.as_deref());
        }
        self.events.push(StepEvent::Moved(node.id.clone()));
        self.state.current = Some(node.id.clone());
        let prefix = join_parts(self.prefix.iter().map(|s| Some(s.as_str())));
        let candidates = composed
            .into_iter()
            .map(|mut c| {
                c.opener = join_parts([Some(prefix.as_str()), Some(c.opener.as_str())]);
                c
            })
            .collect();
        let uses_entity = node.segments.iter().any(|s| {
            s.callback.as_deref() == Some("echo_entity")
                || s.args.get("key").and_then(|k| k.as_str()) == Some("@entity")
        });
        Some(StepResult {
            candidates,
            node: Some(node.id.clone()),
            da: node.da,
            entities: if uses_entity {
                self.input.entities.iter().take(1).map(|e| e.uri.clone()).collect()
            } else {
                Vec::new()
            },
            handover_opener: None,
            state: self.state.clone(),
            events: Vec::new(),
        })
    }

    fn exit(&mut self, id: &str) -> Option<StepResult> {
        let node = self.graph.node(id).expect("validated");
        let spec = node.exit.as_ref().expect("checked");
        self.events.push(StepEvent::Exit(node.id.clone()));
        let composed = self.options(node, std::slice::from_ref(&spec.segment));
        if let Some(c) = composed.choose(self.rng) {
            self.prefix.push(c.text());
        }
        match &spec.next {
            Some(next) if !self.capped(self.graph.node(next).expect("validated")) => self.emit(next),
            _ => {
                self.state.current = None;
                self.next_miniflow(None)
            }
        }
    }

    fn enter(&mut self) -> Option<StepResult> {
        let previously = !self.state.visited_miniflows.is_empty();
        let explicit_revisit = self.input.initiative == Initiative::User
            && previously
            && self.graph.roots.contains_key("user/visited");
        let root = self.graph.root(self.input.initiative, previously).to_string();
        let node = self.graph.node(&root).expect("validated");
        let mf = self.graph.miniflow_of(&root).expect("validated").id.clone();
        if (self.state.miniflow_visited(&mf) && !explicit_revisit) || self.capped(node) {
            return self.next_miniflow(None);
        }
        self.events.push(StepEvent::Entered(mf));
        self.emit(&root)
    }

    fn advance(&mut self, current: &str) -> Option<StepResult> {
        let node = self.graph.node(current).expect("validated").clone();
        match self.choose_edge(&node) {
            EdgeChoice::Target(t) => self.emit(&t),
            EdgeChoice::Exit(t) => self.exit(&t),
            EdgeChoice::End => {
                self.events.push(StepEvent::NoEdge(node.id.clone()));
                self.state.current = None;
                self.next_miniflow(None)
            }
        }
    }
}

/// One flow turn from `state`. A state naming a node that no longer exists
/// is treated as fresh.
pub fn step<R: Rng + ?Sized>(
    graph: &FlowGraph,
    callbacks: &CallbackRegistry,
    state: &FlowState,
    input: &StepInput<'_>,
    rng: &mut R,
) -> StepResult {
    let mut s = Step {
        graph,
        callbacks,
        input,
        rng,
        state: state.clone(),
        prefix: Vec::new(),
        events: Vec::new(),
    };
    s.state.foreign_turns = 0;
    let current = s.state.current.clone().filter(|c| graph.node(c).is_some());
    let result = match current {
        Some(c) => s.advance(&c),
        None => {
            s.state.current = None;
            s.enter()
        }
    };
    let events = std::mem::take(&mut s.events);
    match result {
        Some(mut r) => {
            r.events = events;
            r
        }
        None => StepResult {
            candidates: Vec::new(),
            node: None,
            da: None,
            entities: Vec::new(),
            handover_opener: Some(join_parts(s.prefix.iter().map(|p| Some(p.as_str()))))
                .filter(|o| !o.is_empty()),
            state: s.state,
            events,
        },
    }
}

/// Records a turn where another RG spoke. A node left waiting longer than
/// [`MAX_FOREIGN_TURNS`] is abandoned.
pub fn observe_foreign(state: &FlowState) -> FlowState {
    let mut s = state.clone();
    if s.current.is_some() {
        s.foreign_turns += 1;
        if s.foreign_turns > MAX_FOREIGN_TURNS {
            s.current = None;
            s.foreign_turns = 0;
        }
    }
    s
}

/// True once every miniflow has been entered and nothing is in progress.
pub fn is_exhausted(graph: &FlowGraph, state: &FlowState) -> bool {
    state.current.is_none() && graph.miniflows.iter().all(|m| state.miniflow_visited(&m.id))
}
