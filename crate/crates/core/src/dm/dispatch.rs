use crate::rg::Registration;
use crate::types::{SystemAction, TopicId};

/// Look-up table from (action, topic) to RG ids.
#[derive(Debug, Clone, Default)]
pub struct RgRegistry {
    entries: Vec<(String, Registration)>,
}

impl RgRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rejects duplicate ids and empty registrations.
    pub fn register(&mut self, id: &str, reg: Registration) -> crate::Result<()> {
        if self.entries.iter().any(|(e, _)| e == id) {
            return Err(crate::Error::Config(format!("response generator `{id}` registered twice")));
        }
        if reg.is_empty() && !reg.always_run {
            return Err(crate::Error::Config(format!(
                "response generator `{id}` registers no action or topic"
            )));
        }
        self.entries.push((id.to_string(), reg));
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&Registration> {
        self.entries.iter().find(|(e, _)| e == id).map(|(_, r)| r)
    }

    pub fn entries(&self) -> &[(String, Registration)] {
        &self.entries
    }

    /// Whether `id` may answer this (action, topic).
    pub fn permits(&self, id: &str, action: SystemAction, topic: &TopicId) -> bool {
        self.get(id).is_some_and(|r| r.always_run || r.covers(action, topic))
    }

    /// Registered RGs plus every always-run RG, sorted by id.
    pub fn dispatch(&self, action: SystemAction, topic: &TopicId) -> Vec<String> {
        let mut ids: Vec<String> = self
            .entries
            .iter()
            .filter(|(_, r)| r.always_run || r.covers(action, topic))
            .map(|(id, _)| id.clone())
            .collect();
        ids.sort();
        ids
    }

    /// Whether any topical (not always-run) RG serves this pair.
    pub fn has_topical(&self, action: SystemAction, topic: &TopicId) -> bool {
        self.entries.iter().any(|(_, r)| !r.always_run && r.covers(action, topic))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rg::TopicScope;

    fn registry() -> RgRegistry {
        let mut r = RgRegistry::new();
        r.register("movies_flow", Registration::for_topics([SystemAction::Converse], ["movies"]))
            .unwrap();
        r.register("kg", Registration::for_topics([SystemAction::Converse], ["movies", "music"]))
            .unwrap();
        r.register("red", Registration::new([SystemAction::RedResponse], TopicScope::Any))
            .unwrap();
        r.register("backstory", Registration::always()).unwrap();
        r
    }

    #[test]
    fn converse_movies() {
        assert_eq!(
            registry().dispatch(SystemAction::Converse, &TopicId::new("movies")),
            vec!["backstory", "kg", "movies_flow"]
        );
    }

    #[test]
    fn red_only_topical_rg() {
        assert_eq!(
            registry().dispatch(SystemAction::RedResponse, &TopicId::new("movies")),
            vec!["backstory", "red"]
        );
    }

    #[test]
    fn unknown_topic_gets_always_run() {
        assert_eq!(
            registry().dispatch(SystemAction::Converse, &TopicId::new("pirates")),
            vec!["backstory"]
        );
    }

    #[test]
    fn bad_registrations() {
        let mut r = registry();
        assert!(r.register("kg", Registration::always()).is_err());
        assert!(r
            .register("empty", Registration::new([], TopicScope::Any))
            .is_err());
    }
}
