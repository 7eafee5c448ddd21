use serde::{Deserialize, Serialize};

use crate::dialogue_acts::DaLabel;
use crate::nlu::NluBundle;
use crate::text;
use crate::types::SystemAction;

/// Keyword cues for the action rules.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ActionCues {
    /// Utterances made only of these are treated as silence.
    pub filler: Vec<String>,
    pub repeat: Vec<String>,
    pub help: Vec<String>,
}

fn contains_phrase(tokens: &[String], phrases: &[String]) -> bool {
    phrases
        .iter()
        .any(|p| text::find_token_run(tokens, &text::tokenize(p)).is_some())
}

/// First matching rule wins:
///
/// | condition | action |
/// |---|---|
/// | first turn of the conversation | greet |
/// | red question | red_response |
/// | nothing but filler | wait_prompting |
/// | conversation-closing | conv_closing |
/// | signal-non-understanding or a repeat cue | perform_repeat |
/// | no word at all | repeat_request |
/// | help cue | advise_usage |
/// | request-options | list_options |
/// | change-topic or avoid-topic | topic_change |
/// | anything else | converse |
pub fn decide_action(nlu: &NluBundle, turn_index: u64, cues: &ActionCues) -> SystemAction {
    let toks = &nlu.tokens;
    if turn_index == 0 {
        return SystemAction::Greet;
    }
    if nlu.red_flag.is_some() {
        return SystemAction::RedResponse;
    }
    if toks.iter().all(|t| cues.filler.iter().any(|f| f == t)) {
        return SystemAction::WaitPrompting;
    }
    if nlu.has_da(DaLabel::ConversationClosing) {
        return SystemAction::ConvClosing;
    }
    if nlu.has_da(DaLabel::SignalNonUnderstanding) || contains_phrase(toks, &cues.repeat) {
        return SystemAction::PerformRepeat;
    }
    if !toks.iter().any(|t| t.chars().any(char::is_alphabetic)) {
        return SystemAction::RepeatRequest;
    }
    if contains_phrase(toks, &cues.help) {
        return SystemAction::AdviseUsage;
    }
    if nlu.has_da(DaLabel::RequestOptions) {
        return SystemAction::ListOptions;
    }
    if nlu.has_da(DaLabel::ChangeTopic) || nlu.has_da(DaLabel::AvoidTopic) {
        return SystemAction::TopicChange;
    }
    SystemAction::Converse
}
