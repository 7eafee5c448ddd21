use std::path::Path;

use regex::Regex;

use crate::dialogue_acts::DaLabel;
use crate::error::{Error, Result};
use crate::rg::{Registration, ResponseGenerator, RgContext, RgOutput};
use crate::text;
use crate::types::{ResponseCandidate, SystemAction};

#[derive(Debug, Clone)]
pub struct BackstoryRow {
    pub pattern: Regex,
    pub answer: String,
}

/// `regex \t answer` rows matched against the normalized utterance.
#[derive(Debug, Clone, Default)]
pub struct BackstoryTable {
    rows: Vec<BackstoryRow>,
}

impl BackstoryTable {
    /// Answers containing a deny-lexicon phrase are rejected.
    pub fn parse(data: &str, file: &str, deny: &[String]) -> Result<Self> {
        let deny: Vec<Vec<String>> = deny.iter().map(|d| text::tokenize(d)).filter(|d| !d.is_empty()).collect();
        let mut rows = Vec::new();
        for (line_no, line) in text::data_lines(data) {
            let Some((pat, answer)) = line.split_once('\t') else {
                return Err(Error::parse(file, line_no, "expected pattern, answer"));
            };
            let pattern = Regex::new(pat.trim())
                .map_err(|e| Error::parse(file, line_no, format!("bad pattern: {e}")))?;
            let answer = answer.trim().to_string();
            let toks = text::tokenize(&answer);
            if let Some(d) = deny.iter().find(|d| text::find_token_run(&toks, d).is_some()) {
                return Err(Error::parse(
                    file,
                    line_no,
                    format!("answer claims a human experience (`{}`)", d.join(" ")),
                ));
            }
            rows.push(BackstoryRow { pattern, answer });
        }
        Ok(BackstoryTable { rows })
    }

    pub fn load(path: &Path, deny_path: &Path) -> Result<Self> {
        let deny = text::read_word_list(deny_path)?;
        let data = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&data, &text::file_label(path), &deny)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn lookup(&self, utterance: &str) -> Option<&str> {
        let norm = text::normalize(utterance);
        self.rows
            .iter()
            .find(|r| r.pattern.is_match(&norm))
            .map(|r| r.answer.as_str())
    }
}

/// Answers questions about the bot itself. Runs on every turn but only
/// speaks while conversing.
pub struct BackstoryRg {
    table: std::sync::Arc<BackstoryTable>,
}

impl BackstoryRg {
    pub const ID: &'static str = "backstory";

    pub fn new(table: std::sync::Arc<BackstoryTable>) -> Self {
        BackstoryRg { table }
    }
}

impl ResponseGenerator for BackstoryRg {
    fn id(&self) -> &str {
        Self::ID
    }

    fn registration(&self) -> Registration {
        Registration::always()
    }

    fn respond(&self, ctx: &RgContext) -> Result<RgOutput> {
        if !matches!(ctx.action, SystemAction::Converse | SystemAction::TopicChange) {
            return Ok(RgOutput::none());
        }
        Ok(match self.table.lookup(&ctx.turn.user_text) {
            Some(answer) => RgOutput::one(
                ResponseCandidate::new(Self::ID, ctx.constraints.topic.clone(), answer).with_da(DaLabel::Opinion),
            ),
            None => RgOutput::none(),
        })
    }
}
