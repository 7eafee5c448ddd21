use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text;
use crate::types::UtteranceSegment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RedCategory {
    Profanity,
    Controversial,
    SelfHarm,
    FinancialAdvice,
    PoliticalHotButton,
    OtherSensitive,
}

impl RedCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            RedCategory::Profanity => "profanity",
            RedCategory::Controversial => "controversial",
            RedCategory::SelfHarm => "self_harm",
            RedCategory::FinancialAdvice => "financial_advice",
            RedCategory::PoliticalHotButton => "political_hot_button",
            RedCategory::OtherSensitive => "other_sensitive",
        }
    }

    pub fn parse(name: &str) -> Option<RedCategory> {
        [
            RedCategory::Profanity,
            RedCategory::Controversial,
            RedCategory::SelfHarm,
            RedCategory::FinancialAdvice,
            RedCategory::PoliticalHotButton,
            RedCategory::OtherSensitive,
        ]
        .into_iter()
        .find(|c| c.as_str() == name.trim())
    }
}

impl fmt::Display for RedCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A detected red question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RedFlag {
    pub category: RedCategory,
    pub matched_pattern: String,
    /// Set only for substring hits, which carry a dedicated response.
    pub specific_response_key: Option<String>,
    /// Index of the triggering segment.
    pub segment: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchType {
    Unigram,
    Substring,
}

#[derive(Debug, Clone)]
pub struct RedRow {
    pub pattern: Vec<String>,
    pub match_type: MatchType,
    pub category: RedCategory,
    pub response_key: Option<String>,
}

/// Rows of `(pattern, unigram|substring, category, response_key)`.
#[derive(Debug, Clone, Default)]
pub struct RedTable {
    rows: Vec<RedRow>,
}

impl RedTable {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, &text::file_label(path))
    }

    pub fn parse(data: &str, file: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (line_no, line) in text::data_lines(data) {
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() < 3 {
                return Err(Error::parse(file, line_no, "expected pattern, type, category[, response_key]"));
            }
            let pattern = text::tokenize(cols[0]);
            if pattern.is_empty() {
                return Err(Error::parse(file, line_no, "empty pattern"));
            }
            let match_type = match cols[1].trim() {
                "unigram" => MatchType::Unigram,
                "substring" => MatchType::Substring,
                other => return Err(Error::parse(file, line_no, format!("unknown match type `{other}`"))),
            };
            if match_type == MatchType::Unigram && pattern.len() != 1 {
                return Err(Error::parse(file, line_no, "unigram pattern must be one token"));
            }
            let category = RedCategory::parse(cols[2])
                .ok_or_else(|| Error::parse(file, line_no, format!("unknown category `{}`", cols[2])))?;
            let response_key = cols.get(3).map(|k| k.trim().to_string()).filter(|k| !k.is_empty());
            rows.push(RedRow {
                pattern,
                match_type,
                category,
                response_key,
            });
        }
        Ok(RedTable { rows })
    }

    pub fn rows(&self) -> &[RedRow] {
        &self.rows
    }

    /// Words from profanity unigram rows.
    pub fn profanity_words(&self) -> impl Iterator<Item = &str> {
        self.rows
            .iter()
            .filter(|r| r.match_type == MatchType::Unigram && r.category == RedCategory::Profanity)
            .map(|r| r.pattern[0].as_str())
    }
}

/// Substring rows win over unigram rows; within a type the first table row
/// that fires wins.
pub fn detect_red(segments: &[UtteranceSegment], table: &RedTable) -> Option<RedFlag> {
    let tokenized: Vec<Vec<String>> = segments.iter().map(|s| s.tokens()).collect();
    for row in table.rows.iter().filter(|r| r.match_type == MatchType::Substring) {
        // substring rows may straddle a segment boundary
        let all: Vec<String> = tokenized.iter().flatten().cloned().collect();
        if let Some(pos) = text::find_token_run(&all, &row.pattern) {
            let mut seen = 0;
            let seg = tokenized
                .iter()
                .position(|t| {
                    seen += t.len();
                    pos < seen
                })
                .unwrap_or(0);
            return Some(RedFlag {
                category: row.category,
                matched_pattern: row.pattern.join(" "),
                specific_response_key: row.response_key.clone(),
                segment: seg,
            });
        }
    }
    for row in table.rows.iter().filter(|r| r.match_type == MatchType::Unigram) {
        if let Some(seg) = tokenized.iter().position(|t| t.contains(&row.pattern[0])) {
            return Some(RedFlag {
                category: row.category,
                matched_pattern: row.pattern[0].clone(),
                specific_response_key: None,
                segment: seg,
            });
        }
    }
    None
}
