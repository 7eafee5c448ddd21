use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::error::{Error, Result};
use crate::text;

pub const DEFAULT_CUTOFF: u64 = 60;

/// Phrases so frequent in ordinary chat that a gazetteer hit on them is
/// almost always a false positive ("cool", "how are you").
#[derive(Debug, Clone)]
pub struct CommonPhraseList {
    frequency: BTreeMap<String, u64>,
    pub cutoff: u64,
    exceptions: BTreeSet<String>,
}

impl Default for CommonPhraseList {
    fn default() -> Self {
        CommonPhraseList {
            frequency: BTreeMap::new(),
            cutoff: DEFAULT_CUTOFF,
            exceptions: BTreeSet::new(),
        }
    }
}

impl CommonPhraseList {
    pub fn new<I, J>(frequency: I, cutoff: u64, exceptions: J) -> Self
    where
        I: IntoIterator<Item = (String, u64)>,
        J: IntoIterator<Item = String>,
    {
        CommonPhraseList {
            frequency: frequency.into_iter().map(|(p, f)| (text::normalize(&p), f)).collect(),
            cutoff,
            exceptions: exceptions.into_iter().map(|p| text::normalize(&p)).collect(),
        }
    }

    /// `phrase<TAB>frequency` rows plus a plain exceptions list.
    pub fn load(freq_path: &Path, exceptions_path: &Path, cutoff: u64) -> Result<Self> {
        let file = text::file_label(freq_path);
        let mut freq = Vec::new();
        for (line_no, line) in text::read_data_lines(freq_path)? {
            let mut cols = line.split('\t');
            let phrase = cols.next().unwrap_or("").to_string();
            let f = cols
                .next()
                .and_then(|c| c.trim().parse::<u64>().ok())
                .ok_or_else(|| Error::parse(&file, line_no, "expected phrase<TAB>frequency"))?;
            freq.push((phrase, f));
        }
        let exceptions = text::read_word_list(exceptions_path)?;
        Ok(Self::new(freq, cutoff, exceptions))
    }

    pub fn frequency(&self, phrase: &str) -> u64 {
        self.frequency.get(&text::normalize(phrase)).copied().unwrap_or(0)
    }

    pub fn is_exception(&self, phrase: &str) -> bool {
        self.exceptions.contains(&text::normalize(phrase))
    }

    /// Suppressed iff frequency is strictly above the cutoff and the phrase
    /// is not a curated exception.
    pub fn is_suppressed(&self, phrase: &str) -> bool {
        self.frequency(phrase) > self.cutoff && !self.is_exception(phrase)
    }

    /// The full suppression set `{p : freq(p) > cutoff} \ exceptions`.
    pub fn suppression_set(&self) -> BTreeSet<String> {
        self.frequency
            .iter()
            .filter(|(p, f)| **f > self.cutoff && !self.exceptions.contains(*p))
            .map(|(p, _)| p.clone())
            .collect()
    }

    pub fn phrases(&self) -> impl Iterator<Item = (&str, u64)> {
        self.frequency.iter().map(|(p, f)| (p.as_str(), *f))
    }
}

/// Drops mentions whose surface text is a suppressed common phrase.
pub fn suppress_common<T, F>(mentions: Vec<T>, list: &CommonPhraseList, surface: F) -> Vec<T>
where
    F: Fn(&T) -> &str,
{
    mentions
        .into_iter()
        .filter(|m| !list.is_suppressed(surface(m)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn list() -> CommonPhraseList {
        CommonPhraseList::new(
            [
                ("cool".to_string(), 500),
                ("star wars".to_string(), 300),
                ("how are you".to_string(), 900),
                ("frozen".to_string(), 60),
            ],
            DEFAULT_CUTOFF,
            ["Star Wars".to_string()],
        )
    }

    #[test]
    fn frequent_phrase_suppressed() {
        assert!(list().is_suppressed("cool"));
        assert!(list().is_suppressed("How are you"));
    }

    #[test]
    fn exceptions_kept() {
        assert!(!list().is_suppressed("star wars"));
    }

    #[test]
    fn cutoff_is_strict() {
        assert!(!list().is_suppressed("frozen"));
        assert!(!list().is_suppressed("never seen"));
    }

    #[test]
    fn suppress_filters_mentions() {
        let kept = suppress_common(vec!["cool", "star wars", "frozen"], &list(), |m| m);
        assert_eq!(kept, vec!["star wars", "frozen"]);
    }

    proptest! {
        #[test]
        fn suppression_set_matches_definition(
            rows in proptest::collection::btree_map("[a-z]{1,5}", 0u64..150, 0..20),
            exc in proptest::collection::btree_set("[a-z]{1,5}", 0..6),
            cutoff in 0u64..120,
        ) {
            let l = CommonPhraseList::new(rows.clone(), cutoff, exc.clone());
            let expected: BTreeSet<String> = rows.iter()
                .filter(|(p, f)| **f > cutoff && !exc.contains(*p))
                .map(|(p, _)| p.clone()).collect();
            prop_assert_eq!(l.suppression_set(), expected.clone());
            for e in &exc { prop_assert!(!l.is_suppressed(e)); }
            for (p, _) in &rows { prop_assert_eq!(l.is_suppressed(p), expected.contains(p)); }
        }
    }
}
