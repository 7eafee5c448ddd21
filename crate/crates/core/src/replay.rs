//! Scripted conversations.
//!
//! A script is a list of user turns, each optionally followed by
//! expectations about the turn the engine produced:
//!
//! ```text
//! # comment
//! :seed 11
//! > let's talk about music
//! ? action=topic_change topic=music rg=topic_intro
//! > yeah taylor swift
//! ? rg=kg
//! ? says 114 songs
//! ```
//!
//! `rg` accepts a trailing `*` as a prefix match. `rg=fallback` matches a
//! turn that fell back.

use std::fmt::Write as _;

use crate::dm::trace::TurnTrace;
use crate::engine::{Engine, FALLBACK_RG};
use crate::error::{Error, Result};
use crate::types::SystemAction;

#[derive(Debug, Clone, PartialEq)]
pub enum Expectation {
    Action(SystemAction),
    Topic(String),
    Rg(String),
    Says(String),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScriptTurn {
    pub line: usize,
    pub text: String,
    pub expect: Vec<Expectation>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Script {
    pub seed: Option<u64>,
    pub turns: Vec<ScriptTurn>,
}

impl Script {
    pub fn parse(data: &str, file: &str) -> Result<Script> {
        let mut script = Script::default();
        for (i, raw) in data.lines().enumerate() {
            let line = raw.trim();
            let err = |msg: String| Error::Parse {
                file: file.to_string(),
                line: i + 1,
                reason: msg,
            };
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix(":seed") {
                let seed = rest.trim().parse().map_err(|_| err(format!("bad seed {:?}", rest.trim())))?;
                script.seed = Some(seed);
            } else if let Some(text) = line.strip_prefix('>') {
                script.turns.push(ScriptTurn {
                    line: i + 1,
                    text: text.trim().to_string(),
                    expect: Vec::new(),
                });
            } else if let Some(rest) = line.strip_prefix('?') {
                let turn = script
                    .turns
                    .last_mut()
                    .ok_or_else(|| err("expectation before any turn".into()))?;
                let rest = rest.trim();
                if let Some(said) = rest.strip_prefix("says ") {
                    turn.expect.push(Expectation::Says(said.trim().to_string()));
                    continue;
                }
                for tok in rest.split_whitespace() {
                    let (k, v) = tok.split_once('=').ok_or_else(|| err(format!("expected key=value, got {tok:?}")))?;
                    turn.expect.push(match k {
                        "action" => Expectation::Action(
                            SystemAction::parse(v).ok_or_else(|| err(format!("unknown action {v:?}")))?,
                        ),
                        "topic" => Expectation::Topic(v.to_string()),
                        "rg" => Expectation::Rg(v.to_string()),
                        _ => return Err(err(format!("unknown key {k:?}"))),
                    });
                }
            } else {
                return Err(err(format!("unrecognised line {line:?}")));
            }
        }
        Ok(script)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub line: usize,
    pub turn: usize,
    pub expected: String,
    pub actual: String,
}

#[derive(Debug, Clone, Default)]
pub struct ReplayReport {
    pub traces: Vec<TurnTrace>,
    pub failures: Vec<Failure>,
    pub checks: usize,
}

impl ReplayReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    /// Text report. Latencies are left out so equal runs render equal bytes.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for t in &self.traces {
            let rg = t.chosen_rg.as_deref().unwrap_or(FALLBACK_RG);
            let _ = writeln!(out, "[{}] > {}", t.turn_index, t.user_text);
            let _ = writeln!(out, "    {} {} {} | {}", t.action, t.topic_after, rg, t.response);
        }
        for f in &self.failures {
            let _ = writeln!(
                out,
                "FAIL line {} (turn {}): expected {}, got {}",
                f.line, f.turn, f.expected, f.actual
            );
        }
        let _ = writeln!(
            out,
            "{} turns, {} checks, {} failed",
            self.traces.len(),
            self.checks,
            self.failures.len()
        );
        out
    }
}

fn rg_matches(pattern: &str, actual: &str) -> bool {
    match pattern.strip_suffix('*') {
        Some(prefix) => actual.starts_with(prefix),
        None => pattern == actual,
    }
}

fn check(exp: &Expectation, trace: &TurnTrace) -> Option<(String, String)> {
    let rg = trace.chosen_rg.as_deref().unwrap_or(FALLBACK_RG);
    let (ok, expected, actual) = match exp {
        Expectation::Action(a) => (*a == trace.action, format!("action={a}"), format!("action={}", trace.action)),
        Expectation::Topic(t) => (
            *t == trace.topic_after.0,
            format!("topic={t}"),
            format!("topic={}", trace.topic_after),
        ),
        Expectation::Rg(p) => (rg_matches(p, rg), format!("rg={p}"), format!("rg={rg}")),
        Expectation::Says(s) => (
            trace.response.to_lowercase().contains(&s.to_lowercase()),
            format!("says {s:?}"),
            format!("{:?}", trace.response),
        ),
    };
    (!ok).then_some((expected, actual))
}

/// Runs `script` as a fresh conversation.
pub fn replay(engine: &Engine, script: &Script, conversation_id: &str) -> Result<ReplayReport> {
    match script.seed {
        Some(seed) => engine.reset_with_seed(conversation_id, seed)?,
        None => engine.reset(conversation_id)?,
    }
    let mut report = ReplayReport::default();
    for (i, turn) in script.turns.iter().enumerate() {
        let result = engine.converse(conversation_id, &turn.text, &mut |_| {})?;
        for exp in &turn.expect {
            report.checks += 1;
            if let Some((expected, actual)) = check(exp, &result.trace) {
                report.failures.push(Failure {
                    line: turn.line,
                    turn: i,
                    expected,
                    actual,
                });
            }
        }
        report.traces.push(result.trace);
    }
    Ok(report)
}
