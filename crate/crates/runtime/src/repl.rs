use std::io::{BufRead, Write};

use parley_core::Engine;

pub struct ReplOptions {
    pub conversation_id: String,
    pub trace: bool,
}

const HELP: &str = ":reset  start over\n:seed N  start over with seed N\n:topic  show the current topic\n:quit   leave (so does ctrl-d)";

/// Reads user turns from `input` until EOF or `:quit`. State is saved by
/// the engine's store after every turn.
pub fn run(engine: &Engine, opts: &ReplOptions, input: impl BufRead, out: &mut impl Write) -> std::io::Result<()> {
    let id = opts.conversation_id.as_str();
    let fail = |e: parley_core::Error| std::io::Error::other(e.to_string());
    for line in input.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(cmd) = line.strip_prefix(':') {
            let mut parts = cmd.split_whitespace();
            match (parts.next(), parts.next()) {
                (Some("reset"), None) => {
                    engine.reset(id).map_err(fail)?;
                    writeln!(out, "(reset)")?;
                }
                (Some("seed"), Some(n)) => match n.parse::<u64>() {
                    Ok(seed) => {
                        engine.reset_with_seed(id, seed).map_err(fail)?;
                        writeln!(out, "(reset with seed {seed})")?;
                    }
                    Err(_) => writeln!(out, "(not a seed: {n})")?,
                },
                (Some("topic"), None) => {
                    let topic = engine
                        .store()
                        .load(id)
                        .map_err(fail)?
                        .map(|s| s.topic_state.current_topic.to_string())
                        .unwrap_or_else(|| "introduction".into());
                    writeln!(out, "(topic: {topic})")?;
                }
                (Some("quit"), None) => break,
                _ => writeln!(out, "{HELP}")?,
            }
            continue;
        }
        let result = engine.converse(id, line, &mut |_| {}).map_err(fail)?;
        writeln!(out, "bot: {}", result.response.text())?;
        if opts.trace {
            let json = serde_json::to_string_pretty(&result.trace).map_err(std::io::Error::other)?;
            writeln!(out, "{json}")?;
        }
    }
    writeln!(out, "(saved conversation {id})")?;
    Ok(())
}
