use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::DaLabel;
use crate::error::{Error, Result};
use crate::text;

/// A label with the confidence its tagger assigned.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaggedLabel {
    pub label: DaLabel,
    pub confidence: f64,
}

impl TaggedLabel {
    pub fn new(label: DaLabel, confidence: f64) -> Self {
        TaggedLabel { label, confidence }
    }
}

#[derive(Debug, Clone)]
struct Pattern {
    regex: Regex,
    label: DaLabel,
    priority: i32,
}

/// Phrase tagger driven by a `(regex, label, priority)` pattern file.
///
/// Patterns match against the normalized segment (lowercase, single spaces,
/// no edge punctuation). All firing patterns contribute, highest priority
/// first, each label at most once.
#[derive(Debug, Clone, Default)]
pub struct RegexTagger {
    patterns: Vec<Pattern>,
}

impl RegexTagger {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, &text::file_label(path))
    }

    pub fn parse(text: &str, file: &str) -> Result<Self> {
        let mut patterns = Vec::new();
        for (line_no, line) in text::data_lines(text) {
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() < 2 {
                return Err(Error::parse(file, line_no, "expected `regex<TAB>label[<TAB>priority]`"));
            }
            let regex = Regex::new(&format!("^(?:{})$", cols[0].trim()))
                .map_err(|e| Error::parse(file, line_no, format!("bad regex: {e}")))?;
            let label = DaLabel::parse_known(cols[1])
                .ok_or_else(|| Error::parse(file, line_no, format!("unknown label `{}`", cols[1])))?;
            let priority = match cols.get(2) {
                Some(p) => p
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(file, line_no, "priority must be an integer"))?,
                None => 0,
            };
            patterns.push(Pattern { regex, label, priority });
        }
        // stable: equal priorities keep file order
        patterns.sort_by(|a, b| b.priority.cmp(&a.priority));
        Ok(RegexTagger { patterns })
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn tag(&self, segment: &str) -> Vec<TaggedLabel> {
        let norm = text::normalize(segment);
        let mut out: Vec<TaggedLabel> = Vec::new();
        for p in &self.patterns {
            if p.regex.is_match(&norm) && !out.iter().any(|t| t.label == p.label) {
                out.push(TaggedLabel::new(p.label, 1.0));
            }
        }
        out
    }
}
