use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::initiative::InitiativeChoice;
use crate::error::{Error, Result};
use crate::text;
use crate::types::TopicId;

/// Crafted fallback lines. `initiative` templates take a `{topic}` slot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FallbackTemplates {
    pub initiative: Vec<String>,
    pub prompt: Vec<String>,
}

impl FallbackTemplates {
    pub fn new(initiative: Vec<String>, prompt: Vec<String>) -> Result<Self> {
        let t = FallbackTemplates { initiative, prompt };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        for (group, list) in [("initiative", &self.initiative), ("prompt", &self.prompt)] {
            if list.len() < 2 {
                return Err(Error::Config(format!(
                    "fallback group `{group}` needs at least two templates"
                )));
            }
        }
        if let Some(t) = self.initiative.iter().find(|t| text::slot_names(t) != ["topic"]) {
            return Err(Error::Config(format!(
                "fallback initiative template must use exactly the {{topic}} slot: `{t}`"
            )));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let data = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("fallback templates {}: {e}", path.display())))?;
        let t: FallbackTemplates =
            toml::from_str(&data).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        t.validate()?;
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FallbackResponse {
    pub body: String,
    pub template_id: String,
    /// Topic the system initiated, if any.
    pub topic: Option<TopicId>,
}

fn pick(list: &[String], group: &str, last: Option<&str>, rng: &mut ChaCha8Rng) -> (usize, String) {
    let allowed: Vec<usize> = (0..list.len())
        .filter(|i| Some(format!("{group}/{i}").as_str()) != last)
        .collect();
    let i = allowed[rng.random_range(0..allowed.len())];
    (i, format!("{group}/{i}"))
}

/// A fallback line that never repeats the previous fallback template.
pub fn fallback(
    choice: &InitiativeChoice,
    templates: &FallbackTemplates,
    last_template: Option<&str>,
    rng: &mut ChaCha8Rng,
) -> FallbackResponse {
    match choice {
        InitiativeChoice::SystemTopic(topic) => {
            let (i, id) = pick(&templates.initiative, "initiative", last_template, rng);
            let values = BTreeMap::from([("topic".to_string(), topic.display_name())]);
            let body = text::fill_slots(&templates.initiative[i], &values)
                .unwrap_or_else(|| templates.initiative[i].clone());
            FallbackResponse {
                body,
                template_id: id,
                topic: Some(topic.clone()),
            }
        }
        InitiativeChoice::UserPrompt => {
            let (i, id) = pick(&templates.prompt, "prompt", last_template, rng);
            FallbackResponse {
                body: templates.prompt[i].clone(),
                template_id: id,
                topic: None,
            }
        }
    }
}
