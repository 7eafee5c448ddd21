use serde::{Deserialize, Serialize};

use crate::state::DialogueState;
use crate::types::TopicId;

pub const DEFAULT_INITIATIVE_LIMIT: u32 = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitiativeChoice {
    SystemTopic(TopicId),
    UserPrompt,
}

/// The first unvisited topic from `candidates`, unless the system has already
/// taken `limit` initiatives in a row or nothing is left.
pub fn choose_initiative(state: &DialogueState, candidates: &[TopicId], limit: u32) -> InitiativeChoice {
    if state.dm.consecutive_system_initiatives >= limit {
        return InitiativeChoice::UserPrompt;
    }
    let ts = &state.topic_state;
    candidates
        .iter()
        .find(|t| !ts.visited(t) && **t != ts.current_topic)
        .map(|t| InitiativeChoice::SystemTopic(t.clone()))
        .unwrap_or(InitiativeChoice::UserPrompt)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn topics() -> Vec<TopicId> {
        ["movies", "music", "sports"].into_iter().map(TopicId::new).collect()
    }

    #[test]
    fn prefers_unvisited() {
        let mut s = DialogueState::new("c", 1);
        assert_eq!(choose_initiative(&s, &topics(), 3), InitiativeChoice::SystemTopic(TopicId::new("movies")));
        s.topic_state.record_turn(&TopicId::new("movies"));
        assert_eq!(choose_initiative(&s, &topics(), 3), InitiativeChoice::SystemTopic(TopicId::new("music")));
    }

    #[test]
    fn exhausted_topics_prompt_user() {
        let mut s = DialogueState::new("c", 1);
        for t in topics() {
            s.topic_state.record_turn(&t);
        }
        assert_eq!(choose_initiative(&s, &topics(), 3), InitiativeChoice::UserPrompt);
    }

    #[test]
    fn limit_prompts_user() {
        let mut s = DialogueState::new("c", 1);
        s.dm.consecutive_system_initiatives = 3;
        assert_eq!(choose_initiative(&s, &topics(), 3), InitiativeChoice::UserPrompt);
        s.dm.consecutive_system_initiatives = 2;
        assert!(matches!(choose_initiative(&s, &topics(), 3), InitiativeChoice::SystemTopic(_)));
    }
}
