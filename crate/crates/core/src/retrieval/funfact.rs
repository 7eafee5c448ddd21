use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use crate::dialogue_acts::DaLabel;
use crate::error::{Error, Result};
use crate::rg::{Registration, ResponseGenerator, RgContext, RgOutput, TopicScope};
use crate::text;
use crate::types::{ResponseCandidate, SystemAction};

pub const FUNFACT_PREFIX: &str = "I wonder if you know that";

/// `uri \t fact` rows, facts kept in file order per entity.
#[derive(Debug, Clone, Default)]
pub struct FunFactIndex {
    facts: BTreeMap<String, Vec<String>>,
}

impl FunFactIndex {
    pub fn parse(data: &str, file: &str) -> Result<Self> {
        let mut facts: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (line_no, line) in text::data_lines(data) {
            let Some((uri, fact)) = line.split_once('\t') else {
                return Err(Error::parse(file, line_no, "expected uri, fact"));
            };
            let fact = fact.trim();
            if uri.trim().is_empty() || fact.is_empty() {
                return Err(Error::parse(file, line_no, "empty uri or fact"));
            }
            facts.entry(uri.trim().to_string()).or_default().push(fact.to_string());
        }
        Ok(FunFactIndex { facts })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let data = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&data, &text::file_label(path))
    }

    pub fn len(&self) -> usize {
        self.facts.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    /// First unused fact about the first entity that has one. Returns the
    /// entity, the used-set key and the prefixed text.
    pub fn retrieve(&self, entities: &[String], used: &BTreeSet<String>) -> Option<(String, String, String)> {
        entities.iter().find_map(|uri| {
            let facts = self.facts.get(uri)?;
            facts.iter().enumerate().find_map(|(i, f)| {
                let key = format!("{uri}#{i}");
                (!used.contains(&key)).then(|| (uri.clone(), key, format!("{FUNFACT_PREFIX} {}", lower_first(f))))
            })
        })
    }
}

/// Lowercases a leading function word so the fact reads on after the prefix.
fn lower_first(s: &str) -> String {
    const WORDS: [&str; 10] = ["The", "A", "An", "In", "On", "There", "This", "It", "He", "She"];
    let first = s.split_whitespace().next().unwrap_or("");
    if WORDS.contains(&first) {
        let mut c = s.chars();
        c.next().map(|f| f.to_lowercase().chain(c).collect()).unwrap_or_default()
    } else {
        s.to_string()
    }
}

pub struct FunFactRg {
    index: Arc<FunFactIndex>,
}

impl FunFactRg {
    pub const ID: &'static str = "funfact";

    pub fn new(index: Arc<FunFactIndex>) -> Self {
        FunFactRg { index }
    }
}

impl ResponseGenerator for FunFactRg {
    fn id(&self) -> &str {
        Self::ID
    }

    fn registration(&self) -> Registration {
        Registration::new([SystemAction::Converse], TopicScope::Any)
    }

    fn respond(&self, ctx: &RgContext) -> Result<RgOutput> {
        let mut used: BTreeSet<String> = ctx
            .rg_state(Self::ID)
            .and_then(|b| serde_json::from_slice(b).ok())
            .unwrap_or_default();
        let Some((uri, key, body)) = self.index.retrieve(&ctx.nlu.entity_uris(), &used) else {
            return Ok(RgOutput::none());
        };
        used.insert(key);
        let c = ResponseCandidate::new(Self::ID, ctx.constraints.topic.clone(), body)
            .with_entities([uri])
            .with_da(DaLabel::StatementNonOpinion)
            .factual()
            .with_state(serde_json::to_vec(&used).expect("serializes"));
        Ok(RgOutput::one(c))
    }
}
