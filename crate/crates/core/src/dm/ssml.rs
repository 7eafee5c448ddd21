use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SsmlParam {
    RateReduction,
    Interjection,
    Excited,
}

impl std::str::FromStr for SsmlParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "rate_reduction" => Ok(SsmlParam::RateReduction),
            "interjection" => Ok(SsmlParam::Interjection),
            "excited" => Ok(SsmlParam::Excited),
            other => Err(Error::UnknownSsmlParam(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SsmlConfig {
    pub rate: String,
    /// Responses longer than this many tokens count as long.
    pub long_response_tokens: usize,
    pub interjections: Vec<String>,
}

impl Default for SsmlConfig {
    fn default() -> Self {
        SsmlConfig {
            rate: "90%".into(),
            long_response_tokens: 25,
            interjections: ["awesome", "wow", "oh boy", "yay", "hmm", "aha"]
                .map(String::from)
                .to_vec(),
        }
    }
}

pub fn escape_xml(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// Removes tags and undoes escaping.
pub fn strip_ssml(markup: &str) -> String {
    let mut out = String::with_capacity(markup.len());
    let mut in_tag = false;
    for c in markup.chars() {
        match c {
            '<' => in_tag = true,
            '>' if in_tag => in_tag = false,
            _ if !in_tag => out.push(c),
            _ => {}
        }
    }
    out.replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&quot;", "\"")
        .replace("&apos;", "'")
        .replace("&amp;", "&")
}

/// Leading whitelisted interjection, as a byte length into `text`.
fn leading_interjection(text_in: &str, cfg: &SsmlConfig) -> Option<usize> {
    let lower = text_in.to_lowercase();
    cfg.interjections
        .iter()
        .filter(|i| {
            lower.starts_with(i.as_str())
                && lower[i.len()..]
                    .chars()
                    .next()
                    .is_none_or(|c| !c.is_alphanumeric())
        })
        .map(|i| i.len())
        .max()
}

pub fn is_long(text_in: &str, cfg: &SsmlConfig) -> bool {
    text::tokenize(text_in).len() > cfg.long_response_tokens
}

/// Wraps `text` in `<speak>` with the requested effects. No parameters
/// returns the text unchanged. Stripping tags from the output gives back
/// the input.
pub fn inject_ssml(text_in: &str, params: &[SsmlParam], cfg: &SsmlConfig) -> String {
    if params.is_empty() {
        return text_in.to_string();
    }
    let mut inner = match leading_interjection(text_in, cfg).filter(|_| params.contains(&SsmlParam::Interjection)) {
        Some(n) => format!(
            "<say-as interpret-as=\"interjection\">{}</say-as>{}",
            escape_xml(&text_in[..n]),
            escape_xml(&text_in[n..])
        ),
        None => escape_xml(text_in),
    };
    if params.contains(&SsmlParam::RateReduction) {
        inner = format!("<prosody rate=\"{}\">{inner}</prosody>", escape_xml(&cfg.rate));
    }
    if params.contains(&SsmlParam::Excited) {
        inner = format!("<amazon:emotion name=\"excited\" intensity=\"medium\">{inner}</amazon:emotion>");
    }
    format!("<speak>{inner}</speak>")
}

/// Parameters the builder applies to a response.
pub fn params_for(text_in: &str, factual: bool, excited: bool, cfg: &SsmlConfig) -> Vec<SsmlParam> {
    let mut p = Vec::new();
    if factual && is_long(text_in, cfg) {
        p.push(SsmlParam::RateReduction);
    }
    if leading_interjection(text_in, cfg).is_some() {
        p.push(SsmlParam::Interjection);
    }
    if excited {
        p.push(SsmlParam::Excited);
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn long_fact_slowed() {
        let cfg = SsmlConfig::default();
        let fact = "word ".repeat(30);
        let p = params_for(&fact, true, false, &cfg);
        assert_eq!(p, vec![SsmlParam::RateReduction]);
        assert!(inject_ssml(&fact, &p, &cfg).contains("<prosody rate=\"90%\">"));
        assert!(params_for("short fact", true, false, &cfg).is_empty());
    }

    #[test]
    fn no_params_identity() {
        assert_eq!(inject_ssml("a & b", &[], &SsmlConfig::default()), "a & b");
    }

    #[test]
    fn interjection_only_for_whitelist() {
        let cfg = SsmlConfig::default();
        let out = inject_ssml("Wow, that is big.", &[SsmlParam::Interjection], &cfg);
        assert!(out.contains("<say-as interpret-as=\"interjection\">Wow</say-as>"));
        let out = inject_ssml("Gosh, that is big.", &[SsmlParam::Interjection], &cfg);
        assert!(!out.contains("say-as"));
        assert!(params_for("Wowsers indeed", false, false, &cfg).is_empty());
    }

    #[test]
    fn unknown_param_errors() {
        assert!("whisper".parse::<SsmlParam>().is_err());
        assert_eq!("excited".parse::<SsmlParam>().unwrap(), SsmlParam::Excited);
    }

    proptest! {
        #[test]
        fn stripping_recovers_text(s in "[ -~]{0,60}", rate in any::<bool>(), inter in any::<bool>(), exc in any::<bool>()) {
            let mut p = Vec::new();
            if rate { p.push(SsmlParam::RateReduction); }
            if inter { p.push(SsmlParam::Interjection); }
            if exc { p.push(SsmlParam::Excited); }
            let out = inject_ssml(&s, &p, &SsmlConfig::default());
            if p.is_empty() {
                prop_assert_eq!(out, s);
            } else {
                prop_assert_eq!(strip_ssml(&out), s.clone());
                prop_assert!(roxmltree::Document::parse(&out.replace("amazon:emotion", "emotion")).is_ok());
            }
        }
    }
}
