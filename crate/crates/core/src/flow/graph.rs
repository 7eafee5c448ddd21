use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::callbacks::CallbackRegistry;
use crate::dialogue_acts::DaLabel;
use crate::error::{Error, Result};
use crate::rg::Initiative;
use crate::types::TopicId;

pub const DEFAULT_CAP: u32 = 2;
pub const DEFAULT_EDGE: &str = "default";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    Opener,
    #[default]
    Body,
    Handoff,
}

/// A set of alternative texts, given inline or produced by a callback.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSpec {
    #[serde(default)]
    pub part: Part,
    #[serde(default)]
    pub templates: Vec<String>,
    #[serde(default)]
    pub callback: Option<String>,
    #[serde(default)]
    pub args: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    /// DA names, or `default` for the catch-all edge.
    pub das: Vec<String>,
    pub target: String,
}

impl Edge {
    pub fn is_default(&self) -> bool {
        self.das.iter().any(|d| d == DEFAULT_EDGE)
    }

    pub fn matches(&self, das: &[DaLabel]) -> bool {
        das.iter().any(|d| self.das.iter().any(|e| e == d.as_str()))
    }
}

/// Response given instead of a node once its cap is reached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitSpec {
    #[serde(flatten)]
    pub segment: SegmentSpec,
    /// Node to continue at; without one the miniflow ends.
    #[serde(default)]
    pub next: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowNode {
    pub id: String,
    pub segments: Vec<SegmentSpec>,
    #[serde(default)]
    pub edges: Vec<Edge>,
    #[serde(default)]
    pub cap: Option<u32>,
    #[serde(default)]
    pub exit: Option<ExitSpec>,
    #[serde(default)]
    pub leaf: bool,
    #[serde(default)]
    pub leaf_target: Option<String>,
    /// Dialogue act the node's response realizes.
    #[serde(default)]
    pub da: Option<DaLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Miniflow {
    pub id: String,
    pub root: String,
    pub nodes: Vec<FlowNode>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ordering {
    #[default]
    Sequential,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowGraph {
    pub id: String,
    pub topic: TopicId,
    #[serde(default)]
    pub ordering: Ordering,
    #[serde(default = "default_cap")]
    pub default_cap: u32,
    /// Keys `system/new`, `system/visited`, `user/new`, `user/visited`.
    pub roots: BTreeMap<String, String>,
    pub miniflows: Vec<Miniflow>,
    /// Lookup data for the `knowledge_slot` callback.
    #[serde(default)]
    pub knowledge: BTreeMap<String, Vec<String>>,
    #[serde(skip)]
    index: HashMap<String, (usize, usize)>,
}

fn default_cap() -> u32 {
    DEFAULT_CAP
}

pub fn root_key(initiative: Initiative, visited: bool) -> String {
    let who = match initiative {
        Initiative::System => "system",
        Initiative::User => "user",
    };
    format!("{who}/{}", if visited { "visited" } else { "new" })
}

impl FlowGraph {
    pub fn parse(data: &str, callbacks: &CallbackRegistry) -> Result<Self> {
        let mut g: FlowGraph =
            serde_json::from_str(data).map_err(|e| Error::InvalidFlow {
                flow: "<unparsed>".into(),
                reason: e.to_string(),
            })?;
        g.build_index()?;
        g.validate(callbacks)?;
        Ok(g)
    }

    pub fn load(path: &Path, callbacks: &CallbackRegistry) -> Result<Self> {
        let data = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read flow {}: {e}", path.display())))?;
        Self::parse(&data, callbacks).map_err(|e| match e {
            Error::InvalidFlow { flow, reason } if flow == "<unparsed>" => Error::InvalidFlow {
                flow: path.display().to_string(),
                reason,
            },
            other => other,
        })
    }

    fn invalid(&self, reason: impl Into<String>) -> Error {
        Error::InvalidFlow {
            flow: self.id.clone(),
            reason: reason.into(),
        }
    }

    fn build_index(&mut self) -> Result<()> {
        let mut index = HashMap::new();
        for (m, mf) in self.miniflows.iter().enumerate() {
            for (n, node) in mf.nodes.iter().enumerate() {
                if index.insert(node.id.clone(), (m, n)).is_some() {
                    return Err(self.invalid(format!("duplicate node id `{}`", node.id)));
                }
            }
        }
        self.index = index;
        Ok(())
    }

    fn validate(&self, callbacks: &CallbackRegistry) -> Result<()> {
        if self.miniflows.is_empty() {
            return Err(self.invalid("no miniflows"));
        }
        let mut mf_ids = BTreeSet::new();
        for mf in &self.miniflows {
            if !mf_ids.insert(mf.id.as_str()) {
                return Err(self.invalid(format!("duplicate miniflow id `{}`", mf.id)));
            }
            if !mf.nodes.iter().any(|n| n.id == mf.root) {
                return Err(self.invalid(format!(
                    "miniflow `{}` root `{}` is not one of its nodes",
                    mf.id, mf.root
                )));
            }
        }
        if !self.roots.contains_key("system/new") {
            return Err(self.invalid("missing root `system/new`"));
        }
        for (key, node) in &self.roots {
            if !["system/new", "system/visited", "user/new", "user/visited"].contains(&key.as_str()) {
                return Err(self.invalid(format!("unknown root key `{key}`")));
            }
            if !self.index.contains_key(node) {
                return Err(self.invalid(format!("root `{key}` points to missing node `{node}`")));
            }
        }
        if self.default_cap == 0 {
            return Err(self.invalid("default cap must be at least 1"));
        }
        let check_segment = |node: &str, s: &SegmentSpec| -> Result<()> {
            match &s.callback {
                Some(cb) if !callbacks.contains(cb) => {
                    Err(self.invalid(format!("node `{node}` uses unregistered callback `{cb}`")))
                }
                Some(_) => Ok(()),
                None if s.templates.is_empty() => {
                    Err(self.invalid(format!("node `{node}` has a segment without templates")))
                }
                None => Ok(()),
            }
        };
        for mf in &self.miniflows {
            for node in &mf.nodes {
                if node.segments.is_empty() {
                    return Err(self.invalid(format!("node `{}` has no segments", node.id)));
                }
                for s in &node.segments {
                    check_segment(&node.id, s)?;
                }
                if node.cap == Some(0) {
                    return Err(self.invalid(format!("node `{}` has cap 0", node.id)));
                }
                if node.leaf && !node.edges.is_empty() {
                    return Err(self.invalid(format!("leaf node `{}` has edges", node.id)));
                }
                if !node.leaf && node.edges.is_empty() {
                    return Err(self.invalid(format!("node `{}` has no edges and is not a leaf", node.id)));
                }
                if let Some(t) = &node.leaf_target {
                    if !node.leaf {
                        return Err(self.invalid(format!("node `{}` has a leaf target but is not a leaf", node.id)));
                    }
                    if !mf_ids.contains(t.as_str()) {
                        return Err(self.invalid(format!(
                            "node `{}` leaf target `{t}` is not a miniflow",
                            node.id
                        )));
                    }
                }
                for e in &node.edges {
                    if !self.index.contains_key(&e.target) {
                        return Err(self.invalid(format!(
                            "edge from `{}` points to missing node `{}`",
                            node.id, e.target
                        )));
                    }
                    if e.das.is_empty() {
                        return Err(self.invalid(format!("edge from `{}` has no labels", node.id)));
                    }
                    for d in &e.das {
                        if d != DEFAULT_EDGE && DaLabel::parse_known(d).is_none() {
                            return Err(self.invalid(format!(
                                "edge from `{}` uses unknown dialogue act `{d}`",
                                node.id
                            )));
                        }
                    }
                }
                if let Some(exit) = &node.exit {
                    check_segment(&node.id, &exit.segment)?;
                    if let Some(n) = &exit.next {
                        if !self.index.contains_key(n) {
                            return Err(self.invalid(format!(
                                "exit of `{}` points to missing node `{n}`",
                                node.id
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn node(&self, id: &str) -> Option<&FlowNode> {
        self.index.get(id).map(|&(m, n)| &self.miniflows[m].nodes[n])
    }

    pub fn miniflow_of(&self, node: &str) -> Option<&Miniflow> {
        self.index.get(node).map(|&(m, _)| &self.miniflows[m])
    }

    pub fn miniflow(&self, id: &str) -> Option<&Miniflow> {
        self.miniflows.iter().find(|m| m.id == id)
    }

    pub fn cap(&self, node: &FlowNode) -> u32 {
        node.cap.unwrap_or(self.default_cap)
    }

    pub fn root(&self, initiative: Initiative, visited: bool) -> &str {
        self.roots
            .get(&root_key(initiative, visited))
            .or_else(|| self.roots.get("system/new"))
            .expect("validated")
    }

    pub fn node_ids(&self) -> impl Iterator<Item = &str> {
        self.miniflows.iter().flat_map(|m| m.nodes.iter().map(|n| n.id.as_str()))
    }
}
