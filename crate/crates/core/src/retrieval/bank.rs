use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rg::{Registration, ResponseGenerator, RgContext, RgOutput, TopicScope};
use crate::text;
use crate::types::{ResponseCandidate, SystemAction, TopicId};
use crate::dialogue_acts::DaLabel;

/// Weights of the current user turn and the two before it.
pub const RECENCY: [f64; 3] = [1.0, 0.5, 0.25];
pub const ENTITY_WEIGHT: f64 = 2.0;
pub const CONCEPT_WEIGHT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Style {
    FactOpinion,
    Opinion,
    Fact,
}

impl Style {
    fn parse(s: &str) -> Option<Style> {
        match s.trim() {
            "fact+opinion" | "fact_opinion" => Some(Style::FactOpinion),
            "opinion" => Some(Style::Opinion),
            "fact" => Some(Style::Fact),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankedResponse {
    pub text: String,
    pub topic: TopicId,
    pub entities: Vec<String>,
    pub concepts: Vec<String>,
    pub style: Style,
}

/// What the user mentioned in one turn.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Mentions {
    pub entities: Vec<String>,
    pub tokens: Vec<String>,
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty() && *x != "-")
        .map(String::from)
        .collect()
}

/// Rows of `topic \t style \t entities \t concepts \t text`.
#[derive(Debug, Clone, Default)]
pub struct ResponseBank {
    responses: Vec<BankedResponse>,
    concept_tokens: Vec<Vec<Vec<String>>>,
}

impl ResponseBank {
    pub fn new(responses: Vec<BankedResponse>) -> Self {
        let concept_tokens = responses
            .iter()
            .map(|r| r.concepts.iter().map(|c| text::tokenize(c)).collect())
            .collect();
        ResponseBank {
            responses,
            concept_tokens,
        }
    }

    pub fn parse(data: &str, file: &str) -> Result<Self> {
        let mut out = Vec::new();
        for (line_no, line) in text::data_lines(data) {
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 5 {
                return Err(Error::parse(file, line_no, "expected topic, style, entities, concepts, text"));
            }
            let style = Style::parse(cols[1])
                .ok_or_else(|| Error::parse(file, line_no, format!("unknown style `{}`", cols[1])))?;
            let body = cols[4].trim();
            if body.is_empty() {
                return Err(Error::parse(file, line_no, "empty response"));
            }
            out.push(BankedResponse {
                text: body.to_string(),
                topic: TopicId::new(cols[0].trim()),
                entities: split_list(cols[2]),
                concepts: split_list(cols[3]),
                style,
            });
        }
        Ok(Self::new(out))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let data = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&data, &text::file_label(path))
    }

    pub fn responses(&self) -> &[BankedResponse] {
        &self.responses
    }

    pub fn topics(&self) -> BTreeSet<TopicId> {
        self.responses.iter().map(|r| r.topic.clone()).collect()
    }

    /// Centering score against mentions ordered most recent first.
    pub fn score(&self, index: usize, window: &[Mentions]) -> f64 {
        let r = &self.responses[index];
        window
            .iter()
            .zip(RECENCY)
            .map(|(m, w)| {
                let e = r.entities.iter().filter(|u| m.entities.contains(u)).count() as f64;
                let c = self.concept_tokens[index]
                    .iter()
                    .filter(|c| !c.is_empty() && text::find_token_run(&m.tokens, c).is_some())
                    .count() as f64;
                w * (ENTITY_WEIGHT * e + CONCEPT_WEIGHT * c)
            })
            .sum()
    }

    /// Best unused response on `topic` with a positive score; ties go to the
    /// lower index.
    pub fn retrieve(&self, topic: Option<&TopicId>, window: &[Mentions], used: &BTreeSet<usize>) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.responses.len() {
            if used.contains(&i) || topic.is_some_and(|t| &self.responses[i].topic != t) {
                continue;
            }
            let s = self.score(i, window);
            if s > 0.0 && best.is_none_or(|(_, b)| s > b) {
                best = Some((i, s));
            }
        }
        best.map(|(i, _)| i)
    }
}

/// Mentions from this turn and the two previous user turns.
pub fn mention_window(ctx: &RgContext) -> Vec<Mentions> {
    let mut w = vec![Mentions {
        entities: ctx.nlu.entity_uris(),
        tokens: ctx.nlu.tokens.clone(),
    }];
    for ex in ctx.state.history.iter().rev().take(RECENCY.len() - 1) {
        w.push(Mentions {
            entities: ex.entities.clone(),
            tokens: text::tokenize(&ex.turn.user_text),
        });
    }
    w
}

pub struct CenteringRg {
    bank: std::sync::Arc<ResponseBank>,
}

impl CenteringRg {
    pub const ID: &'static str = "centering";

    pub fn new(bank: std::sync::Arc<ResponseBank>) -> Self {
        CenteringRg { bank }
    }
}

impl ResponseGenerator for CenteringRg {
    fn id(&self) -> &str {
        Self::ID
    }

    fn registration(&self) -> Registration {
        Registration::new([SystemAction::Converse], TopicScope::Only(self.bank.topics()))
    }

    fn respond(&self, ctx: &RgContext) -> Result<RgOutput> {
        let mut used: BTreeSet<usize> = ctx
            .rg_state(Self::ID)
            .and_then(|b| serde_json::from_slice(b).ok())
            .unwrap_or_default();
        let window = mention_window(ctx);
        let Some(i) = self.bank.retrieve(Some(&ctx.constraints.topic), &window, &used) else {
            return Ok(RgOutput::none());
        };
        used.insert(i);
        let r = &self.bank.responses()[i];
        let da = match r.style {
            Style::Fact => DaLabel::StatementNonOpinion,
            Style::Opinion | Style::FactOpinion => DaLabel::Opinion,
        };
        let c = ResponseCandidate::new(Self::ID, r.topic.clone(), r.text.clone())
            .with_entities(r.entities.clone())
            .with_da(da)
            .with_state(serde_json::to_vec(&used).expect("serializes"));
        Ok(RgOutput::one(c))
    }
}
