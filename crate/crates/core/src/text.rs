//! Small text utilities shared by every stage: ASR-style tokenization,
//! slot filling, stable hashing and set-overlap measures.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Lowercases and splits on whitespace, trimming punctuation at token edges.
///
/// Internal apostrophes and hyphens survive (`don't`, `spider-man`), so does
/// anything else inside a token (`p!nk`). Tokens made only of punctuation
/// are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|raw| {
            let lowered = raw.to_lowercase();
            let trimmed = lowered.trim_matches(|c: char| !c.is_alphanumeric());
            if trimmed.is_empty() {
                None
            } else {
                Some(trimmed.to_string())
            }
        })
        .collect()
}

/// Tokenize then rejoin with single spaces.
pub fn normalize(text: &str) -> String {
    tokenize(text).join(" ")
}

/// Finds `needle` as a contiguous token run inside `hay`, returning the start.
pub fn find_token_run(hay: &[String], needle: &[String]) -> Option<usize> {
    if needle.is_empty() || needle.len() > hay.len() {
        return None;
    }
    (0..=hay.len() - needle.len()).find(|&i| hay[i..i + needle.len()] == *needle)
}

/// Jaccard similarity of two token sets; two empty sets are identical.
pub fn jaccard<'a, I, J>(a: I, b: J) -> f64
where
    I: IntoIterator<Item = &'a str>,
    J: IntoIterator<Item = &'a str>,
{
    let a: HashSet<&str> = a.into_iter().collect();
    let b: HashSet<&str> = b.into_iter().collect();
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.intersection(&b).count() as f64;
    let union = a.union(&b).count() as f64;
    inter / union
}

/// Uppercases the first letter of every word ("kobe bryant" -> "Kobe Bryant").
pub fn title_case(text: &str) -> String {
    text.split(' ')
        .map(|w| {
            let mut chars = w.chars();
            match chars.next() {
                Some(first) => first.to_uppercase().chain(chars).collect(),
                None => String::new(),
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Uppercases the first character only.
pub fn capitalize_first(text: &str) -> String {
    let mut chars = text.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Turns a canonical id like `Kobe_Bryant` into display text.
pub fn uri_display(uri: &str) -> String {
    let base = uri.split('(').next().unwrap_or(uri);
    base.replace('_', " ").trim().to_string()
}

/// FNV-1a, used wherever a hash must be stable across builds and platforms.
pub fn stable_hash(parts: &[&[u8]]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for part in parts {
        for b in part.iter() {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        // separator so ("ab","c") != ("a","bc")
        h ^= 0xff;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Names of the `{slot}` placeholders in a template, in order of appearance.
pub fn slot_names(template: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) => {
                out.push(after[..close].to_string());
                rest = &after[close + 1..];
            }
            None => break,
        }
    }
    out
}

/// Fills every `{slot}` from `values`. Returns `None` when any slot is missing.
pub fn fill_slots(template: &str, values: &BTreeMap<String, String>) -> Option<String> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let close = after.find('}')?;
        let value = values.get(&after[..close])?;
        out.push_str(value);
        rest = &after[close + 1..];
    }
    out.push_str(rest);
    Some(out)
}

/// Collapses whitespace runs, removes space before punctuation and squeezes
/// repeated sentence punctuation.
pub fn clean_spacing(text: &str) -> String {
    let collapsed = text.split_whitespace().collect::<Vec<_>>().join(" ");
    let mut out = String::with_capacity(collapsed.len());
    for c in collapsed.chars() {
        let is_punct = matches!(c, '.' | ',' | '!' | '?' | ';' | ':');
        if is_punct && out.ends_with(' ') {
            out.pop();
        }
        if matches!(c, '.' | ',') && out.ends_with(c) {
            continue;
        }
        if c == ',' && out.ends_with(['.', '!', '?']) {
            continue;
        }
        if c == '.' && out.ends_with(['!', '?']) {
            continue;
        }
        out.push(c);
    }
    out
}

/// Reads a data file's non-empty, non-comment lines with 1-based line numbers.
pub fn read_data_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    Ok(data_lines(&text))
}

pub fn data_lines(text: &str) -> Vec<(usize, String)> {
    text.lines()
        .enumerate()
        .filter_map(|(i, line)| {
            let trimmed = line.trim_end_matches(['\r', '\n']);
            if trimmed.trim().is_empty() || trimmed.trim_start().starts_with('#') {
                None
            } else {
                Some((i + 1, trimmed.to_string()))
            }
        })
        .collect()
}

/// Reads a plain word/phrase list, normalizing each entry.
pub fn read_word_list(path: &Path) -> Result<Vec<String>> {
    Ok(read_data_lines(path)?
        .into_iter()
        .map(|(_, l)| normalize(&l))
        .filter(|l| !l.is_empty())
        .collect())
}

pub fn file_label(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}
