//! Response generators owned by the dialogue manager itself: scripted lines
//! for the non-conversational actions, red-question answers and topic intros.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};

use crate::dm::ActionCues;
use crate::error::{Error, Result};
use crate::nlu::RedCategory;
use crate::rg::{Registration, ResponseGenerator, RgContext, RgOutput, TopicScope};
use crate::text;
use crate::types::{ResponseCandidate, SystemAction, TopicId};

/// `dm/actions.toml`: keyword cues plus one template list per action.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ActionConfig {
    #[serde(default)]
    pub cues: ActionCues,
    #[serde(default)]
    pub templates: BTreeMap<String, Vec<String>>,
}

pub const SYSTEM_ACTIONS: [SystemAction; 7] = [
    SystemAction::Greet,
    SystemAction::ConvClosing,
    SystemAction::AdviseUsage,
    SystemAction::RepeatRequest,
    SystemAction::WaitPrompting,
    SystemAction::PerformRepeat,
    SystemAction::ListOptions,
];

impl ActionConfig {
    pub fn parse(data: &str, file: &str) -> Result<Self> {
        let cfg: ActionConfig = toml::from_str(data).map_err(|e| Error::Config(format!("{file}: {e}")))?;
        for action in SYSTEM_ACTIONS {
            if cfg.templates.get(action.as_str()).is_none_or(|l| l.is_empty()) {
                return Err(Error::Config(format!("{file}: no templates for `{action}`")));
            }
        }
        for (key, list) in &cfg.templates {
            let action = SystemAction::parse(key)
                .ok_or_else(|| Error::Config(format!("{file}: unknown action `{key}`")))?;
            let allowed: &[&str] = match action {
                SystemAction::ListOptions => &["options"],
                SystemAction::PerformRepeat => &["last"],
                _ => &[],
            };
            for t in list {
                if let Some(s) = text::slot_names(t).into_iter().find(|s| !allowed.contains(&s.as_str())) {
                    return Err(Error::Config(format!("{file}: `{key}` template uses unknown slot `{s}`")));
                }
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let data = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&data, &text::file_label(path))
    }
}

/// "a", "a and b", "a, b and c"
pub fn spoken_list(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

pub struct SystemRg {
    templates: BTreeMap<String, Vec<String>>,
    options: Vec<TopicId>,
    max_options: usize,
}

impl SystemRg {
    pub const ID: &'static str = "system";

    pub fn new(config: &ActionConfig, options: Vec<TopicId>) -> Self {
        SystemRg {
            templates: config.templates.clone(),
            options,
            max_options: 3,
        }
    }

    fn options_for(&self, ctx: &RgContext) -> Vec<String> {
        let ts = &ctx.state.topic_state;
        let (mut fresh, seen): (Vec<&TopicId>, Vec<&TopicId>) = self
            .options
            .iter()
            .filter(|t| **t != ts.current_topic)
            .partition(|t| !ts.visited(t));
        fresh.extend(seen);
        fresh.into_iter().take(self.max_options).map(TopicId::display_name).collect()
    }
}

impl ResponseGenerator for SystemRg {
    fn id(&self) -> &str {
        Self::ID
    }

    fn registration(&self) -> Registration {
        Registration::new(SYSTEM_ACTIONS, TopicScope::Any)
    }

    fn respond(&self, ctx: &RgContext) -> Result<RgOutput> {
        let Some(list) = self.templates.get(ctx.action.as_str()).filter(|l| !l.is_empty()) else {
            return Ok(RgOutput::none());
        };
        let mut rng = ctx.rng(Self::ID);
        let template = list.choose(&mut rng).expect("non-empty");
        let mut values = BTreeMap::new();
        match ctx.action {
            SystemAction::PerformRepeat => {
                let Some(last) = ctx.state.last_response() else {
                    return Ok(RgOutput::none());
                };
                values.insert("last".to_string(), last.content());
            }
            SystemAction::ListOptions => {
                values.insert("options".to_string(), spoken_list(&self.options_for(ctx)));
            }
            _ => {}
        }
        let Some(body) = text::fill_slots(template, &values) else {
            return Ok(RgOutput::none());
        };
        Ok(RgOutput::one(ResponseCandidate::new(Self::ID, ctx.constraints.topic.clone(), body)))
    }
}

/// Scripted answers to red questions: by response key, then by category,
/// then a default.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RedResponses {
    #[serde(default)]
    pub specific: BTreeMap<String, String>,
    #[serde(default)]
    pub category: BTreeMap<String, Vec<String>>,
    pub default: Vec<String>,
}

impl RedResponses {
    pub fn parse(data: &str, file: &str) -> Result<Self> {
        let r: RedResponses = toml::from_str(data).map_err(|e| Error::Config(format!("{file}: {e}")))?;
        if r.default.is_empty() {
            return Err(Error::Config(format!("{file}: red responses need a default line")));
        }
        if let Some(bad) = r.category.keys().find(|k| RedCategory::parse(k).is_none()) {
            return Err(Error::Config(format!("{file}: unknown red category `{bad}`")));
        }
        Ok(r)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let data = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&data, &text::file_label(path))
    }
}

pub struct RedRg {
    responses: RedResponses,
}

impl RedRg {
    pub const ID: &'static str = "red";

    pub fn new(responses: RedResponses) -> Self {
        RedRg { responses }
    }
}

impl ResponseGenerator for RedRg {
    fn id(&self) -> &str {
        Self::ID
    }

    fn registration(&self) -> Registration {
        Registration::new([SystemAction::RedResponse], TopicScope::Any)
    }

    fn respond(&self, ctx: &RgContext) -> Result<RgOutput> {
        let Some(flag) = &ctx.nlu.red_flag else {
            return Ok(RgOutput::none());
        };
        let mut rng = ctx.rng(Self::ID);
        let specific = flag
            .specific_response_key
            .as_ref()
            .and_then(|k| self.responses.specific.get(k))
            .cloned();
        let body = specific
            .or_else(|| {
                self.responses
                    .category
                    .get(flag.category.as_str())
                    .and_then(|l| l.choose(&mut rng))
                    .cloned()
            })
            .or_else(|| self.responses.default.choose(&mut rng).cloned());
        Ok(match body {
            Some(b) => RgOutput::one(ResponseCandidate::new(Self::ID, ctx.constraints.topic.clone(), b)),
            None => RgOutput::none(),
        })
    }
}

/// Opening lines for a topic the DM has just moved to.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TopicIntros {
    #[serde(default)]
    pub intros: BTreeMap<String, Vec<String>>,
    /// Used for topics without their own line; takes `{topic}`.
    pub default: Vec<String>,
}

impl TopicIntros {
    pub fn parse(data: &str, file: &str) -> Result<Self> {
        let t: TopicIntros = toml::from_str(data).map_err(|e| Error::Config(format!("{file}: {e}")))?;
        if t.default.is_empty() {
            return Err(Error::Config(format!("{file}: topic intros need a default line")));
        }
        Ok(t)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let data = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&data, &text::file_label(path))
    }
}

pub struct TopicIntroRg {
    intros: TopicIntros,
}

impl TopicIntroRg {
    pub const ID: &'static str = "topic_intro";

    pub fn new(intros: TopicIntros) -> Self {
        TopicIntroRg { intros }
    }
}

impl ResponseGenerator for TopicIntroRg {
    fn id(&self) -> &str {
        Self::ID
    }

    fn registration(&self) -> Registration {
        Registration::new([SystemAction::TopicChange], TopicScope::Any)
    }

    fn respond(&self, ctx: &RgContext) -> Result<RgOutput> {
        let topic = &ctx.constraints.topic;
        let mut rng = ctx.rng(Self::ID);
        let own = self.intros.intros.get(topic.as_str()).filter(|l| !l.is_empty());
        let list = own.unwrap_or(&self.intros.default);
        let Some(t) = list.choose(&mut rng) else {
            return Ok(RgOutput::none());
        };
        let values = BTreeMap::from([("topic".to_string(), topic.display_name())]);
        let body = text::fill_slots(t, &values).unwrap_or_else(|| t.clone());
        Ok(RgOutput::one(ResponseCandidate::new(Self::ID, topic.clone(), body)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dm::ResponseConstraints;
    use crate::nlu::{NluBundle, RedFlag};
    use crate::rg::Initiative;
    use crate::state::DialogueState;
    use crate::topic::TopicRegistry;
    use crate::types::{SystemResponse, Turn};
    use std::sync::Arc;

    const ACTIONS: &str = r#"
[cues]
repeat = ["repeat that"]
[templates]
greet = ["Hi there! How are you doing today?"]
conv_closing = ["It was nice chatting. Bye!"]
advise_usage = ["You can ask me to talk about a topic."]
repeat_request = ["Sorry, could you say that again?"]
wait_prompting = ["Take your time."]
perform_repeat = ["I said, {last}"]
list_options = ["We could talk about {options}."]
"#;

    fn ctx(action: SystemAction, state: DialogueState) -> RgContext {
        RgContext {
            turn: Turn {
                conversation_id: "c".into(),
                turn_index: state.turn_index(),
                user_text: String::new(),
                timestamp: 0,
            },
            action,
            constraints: ResponseConstraints::topic_only(state.topic_state.current_topic.clone()),
            nlu: NluBundle::empty(),
            state,
            topics: Arc::new(TopicRegistry::parse("[[topic]]\nid = \"introduction\"").unwrap()),
            initiative: Initiative::System,
            turn_seed: 5,
        }
    }

    #[test]
    fn every_system_action_needs_templates() {
        assert!(ActionConfig::parse(ACTIONS, "a").is_ok());
        let missing = ACTIONS.replace("greet = [\"Hi there! How are you doing today?\"]\n", "");
        assert!(ActionConfig::parse(&missing, "a").is_err());
        let bad_slot = ACTIONS.replace("Take your time.", "Take {x}.");
        assert!(ActionConfig::parse(&bad_slot, "a").is_err());
    }

    #[test]
    fn repeat_says_last_content() {
        let cfg = ActionConfig::parse(ACTIONS, "a").unwrap();
        let rg = SystemRg::new(&cfg, vec![]);
        let mut s = DialogueState::new("c", 1);
        s.history.push(crate::state::Exchange {
            turn: Turn {
                conversation_id: "c".into(),
                turn_index: 0,
                user_text: "hi".into(),
                timestamp: 0,
            },
            response: SystemResponse {
                ground: Some("Okay.".into()),
                opener: None,
                body: "I love wolves.".into(),
                handoff: None,
                source_rg: "flow:animals".into(),
                ssml: None,
            },
            entities: vec![],
        });
        let out = rg.respond(&ctx(SystemAction::PerformRepeat, s)).unwrap();
        assert_eq!(out.candidates[0].body, "I said, I love wolves.");
    }

    #[test]
    fn options_prefer_unvisited() {
        let cfg = ActionConfig::parse(ACTIONS, "a").unwrap();
        let rg = SystemRg::new(&cfg, ["movies", "music", "sports", "books"].map(TopicId::new).to_vec());
        let mut s = DialogueState::new("c", 1);
        s.topic_state.record_turn(&TopicId::new("movies"));
        s.topic_state.record_turn(&TopicId::new("introduction"));
        let out = rg.respond(&ctx(SystemAction::ListOptions, s)).unwrap();
        assert_eq!(out.candidates[0].body, "We could talk about music, sports and books.");
    }

    #[test]
    fn red_prefers_specific_key() {
        let r = RedResponses::parse(
            "default = [\"Let's talk about something else.\"]\n[specific]\nfinancial_generic = \"I can't give financial advice.\"\n[category]\nprofanity = [\"Let's keep it friendly.\"]\n",
            "red",
        )
        .unwrap();
        let rg = RedRg::new(r);
        let mut c = ctx(SystemAction::RedResponse, DialogueState::new("c", 1));
        c.nlu.red_flag = Some(RedFlag {
            category: RedCategory::FinancialAdvice,
            matched_pattern: "should i buy".into(),
            specific_response_key: Some("financial_generic".into()),
            segment: 0,
        });
        assert_eq!(rg.respond(&c).unwrap().candidates[0].body, "I can't give financial advice.");
        c.nlu.red_flag.as_mut().unwrap().specific_response_key = None;
        assert_eq!(rg.respond(&c).unwrap().candidates[0].body, "Let's talk about something else.");
        c.nlu.red_flag.as_mut().unwrap().category = RedCategory::Profanity;
        assert_eq!(rg.respond(&c).unwrap().candidates[0].body, "Let's keep it friendly.");
    }

    #[test]
    fn spoken_lists() {
        let l = |v: &[&str]| spoken_list(&v.iter().map(|s| s.to_string()).collect::<Vec<_>>());
        assert_eq!(l(&[]), "");
        assert_eq!(l(&["a"]), "a");
        assert_eq!(l(&["a", "b"]), "a and b");
    }
}
