use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text;
use crate::types::{EntityType, Gender};

pub const EXACT_SCORE: f64 = 2.0;
pub const PREFIX_FACTOR: f64 = 1.2;

/// One gazetteer row. Several rows may share a uri (aliases).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazetteerRecord {
    pub name: String,
    pub entity_type: EntityType,
    pub uri: String,
    pub popularity: u64,
    pub gender: Option<Gender>,
    pub summary: Option<String>,
}

impl GazetteerRecord {
    pub fn new(name: &str, entity_type: EntityType, uri: &str, popularity: u64) -> Self {
        GazetteerRecord {
            name: name.to_string(),
            entity_type,
            uri: uri.to_string(),
            popularity,
            gender: None,
            summary: None,
        }
    }
}

/// Parses `name, type, uri, popularity[, gender, summary]` rows.
pub fn parse_gazetteer(data: &str, file: &str) -> Result<Vec<GazetteerRecord>> {
    let mut out = Vec::new();
    for (line_no, line) in text::data_lines(data) {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 4 {
            return Err(Error::parse(file, line_no, "expected name, type, uri, popularity"));
        }
        let entity_type = EntityType::parse(cols[1])
            .ok_or_else(|| Error::parse(file, line_no, format!("unknown entity type `{}`", cols[1])))?;
        let popularity = cols[3]
            .trim()
            .parse()
            .map_err(|_| Error::parse(file, line_no, "popularity must be a non-negative integer"))?;
        out.push(GazetteerRecord {
            name: cols[0].trim().to_string(),
            entity_type,
            uri: cols[2].trim().to_string(),
            popularity,
            gender: cols.get(4).and_then(|g| Gender::parse(g)),
            summary: cols.get(5).map(|s| s.trim().to_string()).filter(|s| !s.is_empty()),
        });
    }
    Ok(out)
}

pub fn load_gazetteer(path: &Path) -> Result<Vec<GazetteerRecord>> {
    let data = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_gazetteer(&data, &text::file_label(path))
}

/// A gazetteer record with its relevance to a query.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCandidate {
    pub record: GazetteerRecord,
    pub score: f64,
}

/// Inverted index over gazetteer names with a fixed relevance scorer:
/// exact name match scores 2.0; when one side is a token prefix of the other
/// the token Jaccard overlap is scaled by 1.2; otherwise the plain overlap.
#[derive(Debug, Clone, Default)]
pub struct GazetteerIndex {
    records: Vec<GazetteerRecord>,
    name_tokens: Vec<Vec<String>>,
    postings: HashMap<String, Vec<usize>>,
    exact: HashMap<Vec<String>, Vec<usize>>,
    max_name_len: usize,
    duplicates_dropped: usize,
}

impl GazetteerIndex {
    pub fn build(records: Vec<GazetteerRecord>) -> Self {
        let mut index = GazetteerIndex::default();
        let mut seen: HashSet<(String, EntityType, String)> = HashSet::new();
        for rec in records {
            let toks = text::tokenize(&rec.name);
            if toks.is_empty() {
                continue;
            }
            if !seen.insert((toks.join(" "), rec.entity_type, rec.uri.clone())) {
                index.duplicates_dropped += 1;
                continue;
            }
            let id = index.records.len();
            let uniq: BTreeSet<&String> = toks.iter().collect();
            for t in uniq {
                index.postings.entry(t.clone()).or_default().push(id);
            }
            index.exact.entry(toks.clone()).or_default().push(id);
            index.max_name_len = index.max_name_len.max(toks.len());
            index.name_tokens.push(toks);
            index.records.push(rec);
        }
        if index.duplicates_dropped > 0 {
            log::warn!(
                "gazetteer: dropped {} duplicate (name, type, uri) rows",
                index.duplicates_dropped
            );
        }
        index
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn duplicates_dropped(&self) -> usize {
        self.duplicates_dropped
    }

    pub fn records(&self) -> &[GazetteerRecord] {
        &self.records
    }

    pub fn max_name_len(&self) -> usize {
        self.max_name_len
    }

    /// Records whose full name equals the token run.
    pub fn exact(&self, tokens: &[String]) -> impl Iterator<Item = &GazetteerRecord> {
        self.exact
            .get(tokens)
            .into_iter()
            .flatten()
            .map(move |&i| &self.records[i])
    }

    pub fn relevance(query: &[String], name: &[String]) -> f64 {
        if query == name {
            return EXACT_SCORE;
        }
        let overlap = text::jaccard(query.iter().map(String::as_str), name.iter().map(String::as_str));
        if overlap == 0.0 {
            return 0.0;
        }
        let prefix = name.starts_with(query) || query.starts_with(name);
        if prefix {
            PREFIX_FACTOR * overlap
        } else {
            overlap
        }
    }

    /// Scored lookup, best first; ties by popularity then uri.
    pub fn query(&self, query: &str, types: Option<&[EntityType]>) -> Vec<ScoredCandidate> {
        self.query_tokens(&text::tokenize(query), types)
    }

    pub fn query_tokens(&self, query: &[String], types: Option<&[EntityType]>) -> Vec<ScoredCandidate> {
        let mut hits: BTreeSet<usize> = BTreeSet::new();
        for t in query {
            if let Some(ids) = self.postings.get(t) {
                hits.extend(ids.iter().copied());
            }
        }
        let mut out: Vec<ScoredCandidate> = hits
            .into_iter()
            .filter(|&i| types.is_none_or(|ts| ts.contains(&self.records[i].entity_type)))
            .map(|i| ScoredCandidate {
                record: self.records[i].clone(),
                score: Self::relevance(query, &self.name_tokens[i]),
            })
            .filter(|c| c.score > 0.0)
            .collect();
        sort_candidates(&mut out);
        out
    }
}

pub fn sort_candidates(cands: &mut [ScoredCandidate]) {
    cands.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(b.record.popularity.cmp(&a.record.popularity))
            .then(a.record.uri.cmp(&b.record.uri))
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> GazetteerIndex {
        GazetteerIndex::build(vec![
            GazetteerRecord::new("Taylor Swift", EntityType::Musician, "Taylor_Swift", 950),
            GazetteerRecord::new("Taylor Swift", EntityType::Album, "Taylor_Swift_(album)", 300),
            GazetteerRecord::new("Taylor Lautner", EntityType::Actor, "Taylor_Lautner", 400),
        ])
    }

    #[test]
    fn exact_name_ranks_first() {
        let hits = fixture().query("taylor swift", None);
        assert_eq!(hits[0].record.uri, "Taylor_Swift");
        assert_eq!(hits[0].score, EXACT_SCORE);
        assert_eq!(hits[1].record.uri, "Taylor_Swift_(album)");
        assert!(hits[2].score < 1.0);
    }

    #[test]
    fn type_filter_excludes() {
        let hits = fixture().query("taylor swift", Some(&[EntityType::Album, EntityType::Song]));
        assert!(hits.iter().all(|h| h.record.entity_type == EntityType::Album));
    }

    #[test]
    fn empty_index_finds_nothing() {
        assert!(GazetteerIndex::build(vec![]).query("anything", None).is_empty());
    }

    #[test]
    fn duplicates_are_dropped() {
        let idx = GazetteerIndex::build(vec![
            GazetteerRecord::new("Cool", EntityType::Movie, "Cool_(film)", 3),
            GazetteerRecord::new("cool", EntityType::Movie, "Cool_(film)", 3),
        ]);
        assert_eq!(idx.len(), 1);
        assert_eq!(idx.duplicates_dropped(), 1);
    }

    #[test]
    fn relevance_oracle() {
        let q = text::tokenize("bad blood");
        assert_eq!(GazetteerIndex::relevance(&q, &text::tokenize("bad blood")), 2.0);
        // prefix: jaccard({bad},{bad,blood}) = 0.5, times 1.2
        assert!((GazetteerIndex::relevance(&q, &text::tokenize("bad")) - 0.6).abs() < 1e-12);
        // plain overlap: jaccard({bad,blood},{blood,moon}) = 1/3
        assert!((GazetteerIndex::relevance(&q, &text::tokenize("blood moon")) - 1.0 / 3.0).abs() < 1e-12);
    }
}
