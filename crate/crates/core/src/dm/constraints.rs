use serde::{Deserialize, Serialize};

use crate::dialogue_acts::DaLabel;
use crate::types::{SystemAction, TopicId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hardness {
    Hard,
    Soft,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintHardness {
    pub topic: Hardness,
    pub entities: Hardness,
    pub dialogue_act: Hardness,
}

impl Default for ConstraintHardness {
    fn default() -> Self {
        ConstraintHardness {
            topic: Hardness::Hard,
            entities: Hardness::Soft,
            dialogue_act: Hardness::Soft,
        }
    }
}

/// What the next system utterance should look like.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseConstraints {
    pub topic: TopicId,
    #[serde(default)]
    pub entity_mentions: Vec<String>,
    #[serde(default)]
    pub dialogue_act: Option<DaLabel>,
    #[serde(default)]
    pub new_topic_flag: bool,
    #[serde(default)]
    pub hardness: ConstraintHardness,
}

impl ResponseConstraints {
    pub fn topic_only(topic: TopicId) -> Self {
        ResponseConstraints {
            topic,
            entity_mentions: Vec::new(),
            dialogue_act: None,
            new_topic_flag: false,
            hardness: ConstraintHardness::default(),
        }
    }
}

/// Soft DA targets cycled over converse turns.
pub const DA_CYCLE: [DaLabel; 3] = [DaLabel::Opinion, DaLabel::StatementNonOpinion, DaLabel::OpinionQuestion];

pub fn cycle_da(converse_count: u64) -> DaLabel {
    DA_CYCLE[(converse_count % DA_CYCLE.len() as u64) as usize]
}

/// Builds constraints for a `converse` or `topic_change` turn. The entity
/// constraint carries the user's current mentions so the reply can talk about
/// the same things.
pub fn generate_constraints(
    action: SystemAction,
    topic: TopicId,
    previous_topic: &TopicId,
    user_entities: &[String],
    converse_count: u64,
) -> ResponseConstraints {
    let new_topic_flag = action == SystemAction::TopicChange || &topic != previous_topic;
    ResponseConstraints {
        topic,
        entity_mentions: user_entities.to_vec(),
        dialogue_act: Some(cycle_da(converse_count)),
        new_topic_flag,
        hardness: ConstraintHardness::default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn user_entity_carried() {
        let c = generate_constraints(
            SystemAction::Converse,
            TopicId::new("sports"),
            &TopicId::new("sports"),
            &["Kobe_Bryant".to_string()],
            0,
        );
        assert_eq!(c.entity_mentions, vec!["Kobe_Bryant"]);
        assert!(!c.new_topic_flag);
        assert_eq!(c.hardness.topic, Hardness::Hard);
    }

    #[test]
    fn topic_change_sets_flag() {
        let c = generate_constraints(SystemAction::TopicChange, TopicId::new("movies"), &TopicId::new("movies"), &[], 4);
        assert!(c.new_topic_flag);
        let c = generate_constraints(SystemAction::Converse, TopicId::new("movies"), &TopicId::new("sports"), &[], 4);
        assert!(c.new_topic_flag);
    }

    proptest! {
        #[test]
        fn any_twelve_converse_turns_cover_the_cycle(start in 0u64..10_000) {
            let seen: std::collections::HashSet<DaLabel> = (start..start + 12).map(cycle_da).collect();
            for d in DA_CYCLE {
                prop_assert!(seen.contains(&d));
            }
        }
    }
}
