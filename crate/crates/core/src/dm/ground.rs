use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dialogue_acts::DaLabel;
use crate::error::{Error, Result};
use crate::nlu::{polarity, Polarity};
use crate::text;
use crate::types::LinkedEntity;

/// Grounding lines. `entity` templates take an `{entity}` slot and are keyed
/// by `opinion`, `question` or `default`; `da` templates are keyed by DA name,
/// `opinion_<polarity>`, `comment_<polarity>`, `question` or `default`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct GroundingTemplates {
    #[serde(default)]
    pub entity: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub da: BTreeMap<String, Vec<String>>,
}

impl GroundingTemplates {
    pub fn load(path: &Path) -> Result<Self> {
        let data = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("grounding templates {}: {e}", path.display())))?;
        let t: GroundingTemplates =
            toml::from_str(&data).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if t.da.get("default").is_none_or(|v| v.is_empty()) {
            return Err(Error::Config("grounding templates need a non-empty da.default".into()));
        }
        Ok(t)
    }
}

fn polarity_key(p: Polarity) -> &'static str {
    match p {
        Polarity::Positive => "positive",
        Polarity::Negative => "negative",
        Polarity::Neutral => "neutral",
    }
}

/// Backward-looking acknowledgement of the user turn. Depends only on the
/// dialogue act, the linked entities and sentiment (plus `variation` to
/// rotate between equivalent lines). Never on the topic.
pub fn ground(
    da: Option<DaLabel>,
    entities: &[LinkedEntity],
    sentiment: f64,
    templates: &GroundingTemplates,
    variation: u64,
) -> Option<String> {
    let da = da?;
    let pol = polarity_key(polarity(sentiment));
    let choose = |list: &[String], key: &str| -> Option<String> {
        if list.is_empty() {
            return None;
        }
        let h = text::stable_hash(&[&variation.to_le_bytes(), key.as_bytes()]);
        Some(list[(h % list.len() as u64) as usize].clone())
    };
    let lookup = |key: &str| templates.da.get(key).and_then(|l| choose(l, key));

    if da == DaLabel::Command {
        return lookup("command").or_else(|| lookup("default"));
    }
    if let Some(e) = entities.first() {
        let class = if matches!(da, DaLabel::Opinion | DaLabel::Comment) {
            "opinion"
        } else if da.is_question() {
            "question"
        } else {
            "default"
        };
        let list = templates
            .entity
            .get(class)
            .filter(|l| !l.is_empty())
            .or_else(|| templates.entity.get("default"));
        if let Some(t) = list.and_then(|l| choose(l, &e.uri)) {
            let values = BTreeMap::from([("entity".to_string(), e.spoken())]);
            if let Some(s) = text::fill_slots(&t, &values) {
                return Some(s);
            }
        }
    }
    match da {
        DaLabel::Opinion => lookup(&format!("opinion_{pol}")),
        DaLabel::Comment => lookup(&format!("comment_{pol}")),
        d if d.is_question() => lookup(d.as_str()).or_else(|| lookup("question")),
        d => lookup(d.as_str()),
    }
    .or_else(|| lookup("default"))
}
