use std::collections::BTreeMap;
use std::sync::Arc;

use crate::text;
use crate::types::LinkedEntity;

/// What a segment callback can see.
pub struct CallbackContext<'a> {
    pub tokens: &'a [String],
    pub entities: &'a [LinkedEntity],
    pub knowledge: &'a BTreeMap<String, Vec<String>>,
}

/// Produces the alternative texts for a segment, or `None` on failure.
pub trait FlowCallback: Send + Sync {
    fn call(&self, ctx: &CallbackContext<'_>, args: &serde_json::Value) -> Option<Vec<String>>;
}

#[derive(Clone, Default)]
pub struct CallbackRegistry {
    callbacks: BTreeMap<String, Arc<dyn FlowCallback>>,
}

impl CallbackRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The engine's built-in callbacks.
    pub fn with_builtins() -> Self {
        let mut r = Self::default();
        r.register("knowledge_slot", Arc::new(KnowledgeSlot));
        r.register("echo_entity", Arc::new(EchoEntity));
        r.register("echo_name", Arc::new(EchoName));
        r
    }

    pub fn register(&mut self, name: &str, cb: Arc<dyn FlowCallback>) {
        self.callbacks.insert(name.to_string(), cb);
    }

    pub fn contains(&self, name: &str) -> bool {
        self.callbacks.contains_key(name)
    }

    pub fn get(&self, name: &str) -> Option<&Arc<dyn FlowCallback>> {
        self.callbacks.get(name)
    }
}

fn templates_arg(args: &serde_json::Value) -> Vec<String> {
    args.get("templates")
        .and_then(|t| t.as_array())
        .map(|a| a.iter().filter_map(|v| v.as_str().map(String::from)).collect())
        .unwrap_or_default()
}

fn fill_each(templates: &[String], slot: &str, values: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    for t in templates {
        for v in values {
            let map = BTreeMap::from([(slot.to_string(), v.clone())]);
            if let Some(s) = text::fill_slots(t, &map) {
                if !out.contains(&s) {
                    out.push(s);
                }
            }
        }
    }
    out
}

/// Fills `{slot}` (default `value`) from the flow's knowledge table. The
/// `key` argument names the table entry; `@entity` uses the first linked
/// entity's uri.
pub struct KnowledgeSlot;

impl FlowCallback for KnowledgeSlot {
    fn call(&self, ctx: &CallbackContext<'_>, args: &serde_json::Value) -> Option<Vec<String>> {
        let key = args.get("key")?.as_str()?;
        let key = if key == "@entity" {
            ctx.entities.first()?.uri.clone()
        } else {
            key.to_string()
        };
        let values = ctx.knowledge.get(&key)?;
        let slot = args.get("slot").and_then(|s| s.as_str()).unwrap_or("value");
        let out = fill_each(&templates_arg(args), slot, values);
        (!out.is_empty()).then_some(out)
    }
}

/// Repeats the user's first linked entity into `{entity}`.
pub struct EchoEntity;

impl FlowCallback for EchoEntity {
    fn call(&self, ctx: &CallbackContext<'_>, args: &serde_json::Value) -> Option<Vec<String>> {
        let e = ctx.entities.first()?;
        let out = fill_each(&templates_arg(args), "entity", &[e.spoken()]);
        (!out.is_empty()).then_some(out)
    }
}

/// Repeats a name given as "my name is X" / "i'm X" / "call me X" into `{name}`.
pub struct EchoName;

impl FlowCallback for EchoName {
    fn call(&self, ctx: &CallbackContext<'_>, args: &serde_json::Value) -> Option<Vec<String>> {
        let t = ctx.tokens;
        let cues: [&[&str]; 3] = [&["my", "name", "is"], &["call", "me"], &["i'm"]];
        let name = cues.iter().find_map(|cue| {
            let cue: Vec<String> = cue.iter().map(|s| s.to_string()).collect();
            let i = text::find_token_run(t, &cue)?;
            t.get(i + cue.len()).cloned()
        })?;
        let out = fill_each(&templates_arg(args), "name", &[text::title_case(&name)]);
        (!out.is_empty()).then_some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn knowledge_slot_fills() {
        let knowledge = BTreeMap::from([("capital".to_string(), vec!["Paris".to_string()])]);
        let ctx = CallbackContext {
            tokens: &[],
            entities: &[],
            knowledge: &knowledge,
        };
        let out = KnowledgeSlot
            .call(&ctx, &json!({"key": "capital", "templates": ["The capital is {value}."]}))
            .unwrap();
        assert_eq!(out, vec!["The capital is Paris."]);
        assert!(KnowledgeSlot.call(&ctx, &json!({"key": "nope", "templates": ["x"]})).is_none());
    }

    #[test]
    fn echo_name() {
        let toks = text::tokenize("hi my name is sam");
        let knowledge = BTreeMap::new();
        let ctx = CallbackContext {
            tokens: &toks,
            entities: &[],
            knowledge: &knowledge,
        };
        let out = EchoName.call(&ctx, &json!({"templates": ["Nice to meet you, {name}."]})).unwrap();
        assert_eq!(out, vec!["Nice to meet you, Sam."]);
    }
}
