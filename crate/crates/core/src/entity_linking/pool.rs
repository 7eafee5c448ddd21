use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use crate::error::{Error, Result};
use crate::text;
use crate::types::EntityType;

pub const DEFAULT_POOL_CAP: usize = 1000;

/// One row of the lookup table used by the trained linker.
#[derive(Debug, Clone, PartialEq)]
pub struct LookupEntry {
    pub surface: String,
    pub uri: String,
    pub entity_type: EntityType,
    pub popularity: u64,
}

/// Surface-form index producing candidate pools for detected mentions.
#[derive(Debug, Clone, Default)]
pub struct LookupIndex {
    entries: Vec<LookupEntry>,
    tokens: Vec<Vec<String>>,
    postings: HashMap<String, Vec<usize>>,
}

impl LookupIndex {
    pub fn build(entries: Vec<LookupEntry>) -> Self {
        let mut idx = LookupIndex::default();
        for e in entries {
            let toks = text::tokenize(&e.surface);
            if toks.is_empty() {
                continue;
            }
            let id = idx.entries.len();
            for t in toks.iter().collect::<BTreeSet<_>>() {
                idx.postings.entry(t.clone()).or_default().push(id);
            }
            idx.tokens.push(toks);
            idx.entries.push(e);
        }
        idx
    }

    /// `surface, uri, type, popularity` rows.
    pub fn parse(data: &str, file: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (line_no, line) in text::data_lines(data) {
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() < 4 {
                return Err(Error::parse(file, line_no, "expected surface, uri, type, popularity"));
            }
            let entity_type = EntityType::parse(cols[2])
                .ok_or_else(|| Error::parse(file, line_no, format!("unknown entity type `{}`", cols[2])))?;
            let popularity = cols[3]
                .trim()
                .parse()
                .map_err(|_| Error::parse(file, line_no, "bad popularity"))?;
            entries.push(LookupEntry {
                surface: cols[0].trim().to_string(),
                uri: cols[1].trim().to_string(),
                entity_type,
                popularity,
            });
        }
        Ok(Self::build(entries))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let data = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&data, &text::file_label(path))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries sharing at least one token with the mention. Exact surface
    /// matches first, then by overlap, popularity and uri; truncated to `cap`.
    pub fn candidate_pool(&self, mention: &str, cap: usize) -> Vec<&LookupEntry> {
        let m = text::tokenize(mention);
        let mut ids: BTreeSet<usize> = BTreeSet::new();
        for t in &m {
            if let Some(p) = self.postings.get(t) {
                ids.extend(p.iter().copied());
            }
        }
        let mut scored: Vec<(bool, f64, usize)> = ids
            .into_iter()
            .map(|i| {
                let toks = &self.tokens[i];
                let overlap = text::jaccard(m.iter().map(String::as_str), toks.iter().map(String::as_str));
                (*toks == m, overlap, i)
            })
            .collect();
        scored.sort_by(|a, b| {
            b.0.cmp(&a.0)
                .then(b.1.total_cmp(&a.1))
                .then(self.entries[b.2].popularity.cmp(&self.entries[a.2].popularity))
                .then(self.entries[a.2].uri.cmp(&self.entries[b.2].uri))
        });
        scored.truncate(cap);
        scored.into_iter().map(|(_, _, i)| &self.entries[i]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(s: &str, uri: &str, pop: u64) -> LookupEntry {
        LookupEntry {
            surface: s.into(),
            uri: uri.into(),
            entity_type: EntityType::Movie,
            popularity: pop,
        }
    }

    #[test]
    fn exact_first_then_popularity() {
        let idx = LookupIndex::build(vec![
            entry("Spider-Man 2", "Spider-Man_2", 800),
            entry("Spider-Man", "Spider-Man_(2002_film)", 700),
            entry("The Amazing Spider-Man", "The_Amazing_Spider-Man", 900),
        ]);
        let pool = idx.candidate_pool("spider-man", 10);
        assert_eq!(pool[0].uri, "Spider-Man_(2002_film)");
        assert_eq!(pool.len(), 3);
    }

    #[test]
    fn pool_is_capped() {
        let idx = LookupIndex::build(
            (0..1500)
                .map(|i| entry(&format!("batman {i}"), &format!("Batman_{i}"), i))
                .collect(),
        );
        assert_eq!(idx.candidate_pool("batman", DEFAULT_POOL_CAP).len(), DEFAULT_POOL_CAP);
    }
}
