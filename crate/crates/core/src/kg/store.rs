use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text;
use crate::types::{EntityType, Gender};

pub const LABEL: &str = "label";
pub const TYPE: &str = "type";
pub const GENDER: &str = "gender";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectKind {
    Entity,
    Number,
    Text,
    Date,
}

impl ObjectKind {
    pub fn parse(s: &str) -> Option<ObjectKind> {
        match s.trim() {
            "entity" | "uri" => Some(ObjectKind::Entity),
            "number" => Some(ObjectKind::Number),
            "string" | "text" => Some(ObjectKind::Text),
            "date" => Some(ObjectKind::Date),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub subject: String,
    pub relation: String,
    pub object: String,
    pub kind: ObjectKind,
}

impl Triple {
    pub fn number(&self) -> Option<f64> {
        (self.kind == ObjectKind::Number)
            .then(|| self.object.parse().ok())
            .flatten()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregate {
    Count,
    Mean,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationInfo {
    /// Whether every true instance is believed present in the store.
    pub complete: bool,
    pub aggregates: Vec<Aggregate>,
}

/// `relation \t complete|incomplete \t aggregates` where aggregates is a
/// comma list of `count`, `mean`, or `-`.
#[derive(Debug, Clone, Default)]
pub struct RelationRegistry {
    relations: BTreeMap<String, RelationInfo>,
}

impl RelationRegistry {
    pub fn parse(data: &str, file: &str) -> Result<Self> {
        let mut relations = BTreeMap::new();
        for (line_no, line) in text::data_lines(data) {
            let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
            if cols.len() < 2 {
                return Err(Error::parse(file, line_no, "expected relation, completeness[, aggregates]"));
            }
            let complete = match cols[1] {
                "complete" => true,
                "incomplete" => false,
                other => return Err(Error::parse(file, line_no, format!("unknown completeness `{other}`"))),
            };
            let mut aggregates = Vec::new();
            for a in cols.get(2).copied().unwrap_or("-").split(',').map(str::trim) {
                match a {
                    "-" | "" => {}
                    "count" => aggregates.push(Aggregate::Count),
                    "mean" => aggregates.push(Aggregate::Mean),
                    other => return Err(Error::parse(file, line_no, format!("unknown aggregate `{other}`"))),
                }
            }
            relations.insert(cols[0].to_string(), RelationInfo { complete, aggregates });
        }
        for builtin in [LABEL, TYPE, GENDER] {
            relations.entry(builtin.to_string()).or_insert(RelationInfo {
                complete: true,
                aggregates: Vec::new(),
            });
        }
        Ok(RelationRegistry { relations })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let data = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&data, &text::file_label(path))
    }

    pub fn get(&self, relation: &str) -> Option<&RelationInfo> {
        self.relations.get(relation)
    }

    pub fn contains(&self, relation: &str) -> bool {
        self.relations.contains_key(relation)
    }

    pub fn is_complete(&self, relation: &str) -> bool {
        self.get(relation).is_some_and(|r| r.complete)
    }
}

/// In-memory triple index by subject and by entity object.
#[derive(Debug, Clone, Default)]
pub struct TripleStore {
    triples: Vec<Triple>,
    by_subject: HashMap<String, Vec<usize>>,
    by_object: HashMap<String, Vec<usize>>,
    skipped: usize,
}

impl TripleStore {
    pub fn from_triples(triples: impl IntoIterator<Item = Triple>) -> Self {
        let mut store = TripleStore::default();
        let mut seen = HashSet::new();
        for t in triples {
            if seen.insert(t.clone()) {
                store.push(t);
            }
        }
        store
    }

    fn push(&mut self, t: Triple) {
        let i = self.triples.len();
        self.by_subject.entry(t.subject.clone()).or_default().push(i);
        if t.kind == ObjectKind::Entity {
            self.by_object.entry(t.object.clone()).or_default().push(i);
        }
        self.triples.push(t);
    }

    /// Malformed rows and rows with unregistered relations are skipped and
    /// counted.
    pub fn parse(data: &str, file: &str, relations: &RelationRegistry) -> Self {
        let mut rows = Vec::new();
        let mut skipped = 0;
        for (line_no, line) in text::data_lines(data) {
            let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
            let kind = cols.get(3).and_then(|k| ObjectKind::parse(k));
            match (cols.len(), kind) {
                (4, Some(kind)) if relations.contains(cols[1]) && !cols[0].is_empty() && !cols[2].is_empty() => {
                    rows.push(Triple {
                        subject: cols[0].to_string(),
                        relation: cols[1].to_string(),
                        object: cols[2].to_string(),
                        kind,
                    });
                }
                _ => {
                    log::warn!("{file}:{line_no}: skipping malformed triple");
                    skipped += 1;
                }
            }
        }
        let mut store = Self::from_triples(rows);
        store.skipped = skipped;
        store
    }

    pub fn load(path: &Path, relations: &RelationRegistry) -> Result<Self> {
        let data = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Ok(Self::parse(&data, &text::file_label(path), relations))
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn skipped(&self) -> usize {
        self.skipped
    }

    pub fn contains_entity(&self, uri: &str) -> bool {
        self.by_subject.contains_key(uri) || self.by_object.contains_key(uri)
    }

    /// `(subject, relation, ?)` in file order.
    pub fn objects<'a>(&'a self, subject: &str, relation: &'a str) -> impl Iterator<Item = &'a Triple> + 'a {
        self.by_subject
            .get(subject)
            .into_iter()
            .flatten()
            .map(|&i| &self.triples[i])
            .filter(move |t| t.relation == relation)
    }

    /// `(?, relation, object)` in file order.
    pub fn subjects<'a>(&'a self, relation: &'a str, object: &str) -> impl Iterator<Item = &'a Triple> + 'a {
        self.by_object
            .get(object)
            .into_iter()
            .flatten()
            .map(|&i| &self.triples[i])
            .filter(move |t| t.relation == relation)
    }

    pub fn label(&self, uri: &str) -> String {
        self.objects(uri, LABEL)
            .next()
            .map(|t| t.object.clone())
            .unwrap_or_else(|| text::uri_display(uri))
    }

    pub fn entity_type(&self, uri: &str) -> Option<EntityType> {
        self.objects(uri, TYPE).find_map(|t| EntityType::parse(&t.object))
    }

    pub fn gender(&self, uri: &str) -> Option<Gender> {
        self.objects(uri, GENDER).find_map(|t| Gender::parse(&t.object))
    }
}
