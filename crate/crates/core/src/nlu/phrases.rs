use std::collections::HashSet;

use crate::types::Span;

/// Noun-phrase chunker: maximal runs of tokens outside a function-word list.
///
/// Uncased ASR text defeats most taggers; this keeps the content-word runs
/// that the entity linker queries with.
#[derive(Debug, Clone, Default)]
pub struct PhraseChunker {
    stopwords: HashSet<String>,
}

impl PhraseChunker {
    pub fn new<I: IntoIterator<Item = String>>(stopwords: I) -> Self {
        PhraseChunker {
            stopwords: stopwords.into_iter().collect(),
        }
    }

    pub fn is_stopword(&self, tok: &str) -> bool {
        self.stopwords.contains(tok)
    }

    pub fn noun_phrases(&self, tokens: &[String]) -> Vec<Span> {
        let mut out = Vec::new();
        let mut start: Option<usize> = None;
        for (i, t) in tokens.iter().enumerate() {
            let content = !self.stopwords.contains(t) && t.chars().any(|c| c.is_alphanumeric());
            match (content, start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    out.push(Span::new(s, i));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            out.push(Span::new(s, tokens.len()));
        }
        out
    }
}
