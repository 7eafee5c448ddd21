use std::collections::HashSet;
use std::path::Path;

use crate::error::Result;
use crate::text;
use crate::types::{Span, UtteranceSegment};

/// Splits a lowercase token sequence into dialogue-act segments.
///
/// Implementations must be total and deterministic, return ordered,
/// non-overlapping spans that cover every token, and be idempotent on their
/// own output.
pub trait Segmenter: Send + Sync {
    fn segment(&self, tokens: &[String]) -> Vec<UtteranceSegment>;
}

/// Cue lists for the rule segmenter.
#[derive(Debug, Clone)]
pub struct SegmenterModel {
    /// Leading answer tokens split off when more words follow ("yes", "no").
    pub response_tokens: HashSet<String>,
    /// Coordinators stay in the left span but are dropped from its text.
    pub coordinators: HashSet<String>,
    /// Multi-token openers that start a new question segment ("do you").
    pub question_starters: Vec<Vec<String>>,
    /// Markers that open a new segment ("by the way").
    pub discourse_markers: Vec<Vec<String>>,
    /// Words after which a question starter does not split, and which make a
    /// segment a wh-question that absorbs later starters.
    pub wh_words: HashSet<String>,
    pub max_len: usize,
}

fn split_phrases(items: &[String]) -> Vec<Vec<String>> {
    items
        .iter()
        .map(|p| text::tokenize(p))
        .filter(|p| !p.is_empty())
        .collect()
}

impl SegmenterModel {
    pub const DEFAULT_MAX_LEN: usize = 25;

    pub fn from_lists(
        response_tokens: &[String],
        coordinators: &[String],
        question_starters: &[String],
        discourse_markers: &[String],
        wh_words: &[String],
    ) -> Self {
        SegmenterModel {
            response_tokens: response_tokens.iter().cloned().collect(),
            coordinators: coordinators.iter().cloned().collect(),
            question_starters: split_phrases(question_starters),
            discourse_markers: split_phrases(discourse_markers),
            wh_words: wh_words.iter().cloned().collect(),
            max_len: Self::DEFAULT_MAX_LEN,
        }
    }

    /// Loads the five cue lists from a directory of plain-text files.
    pub fn load(dir: &Path) -> Result<Self> {
        let read = |name: &str| text::read_word_list(&dir.join(name));
        Ok(Self::from_lists(
            &read("response_tokens.txt")?,
            &read("coordinators.txt")?,
            &read("question_starters.txt")?,
            &read("discourse_markers.txt")?,
            &read("wh_words.txt")?,
        ))
    }

    fn phrase_at(phrases: &[Vec<String>], tokens: &[String], i: usize) -> bool {
        phrases
            .iter()
            .any(|p| i + p.len() <= tokens.len() && tokens[i..i + p.len()] == p[..])
    }
}

/// Rule-based segmenter. See [`segment_utterance`].
#[derive(Debug, Clone)]
pub struct RuleSegmenter {
    pub model: SegmenterModel,
}

impl Segmenter for RuleSegmenter {
    fn segment(&self, tokens: &[String]) -> Vec<UtteranceSegment> {
        segment_utterance(tokens, &self.model)
    }
}

fn make_segment(tokens: &[String], span: Span, strip_last: bool) -> UtteranceSegment {
    let end = if strip_last { span.end - 1 } else { span.end };
    UtteranceSegment {
        text: tokens[span.start..end].join(" "),
        span,
        da_labels: Vec::new(),
    }
}

/// Left-to-right boundary scan. Rules, checked at every token:
///
/// 1. a response token opening a segment is split off when more words follow;
/// 2. the segment is cut when it reaches `max_len` tokens;
/// 3. a question starter opens a new segment unless the current segment is a
///    wh-question or the previous token is a wh/complementizer word; a
///    preceding coordinator stays in the left span but leaves its text;
/// 4. a discourse marker opens a new segment.
///
/// Empty input yields one empty segment.
pub fn segment_utterance(tokens: &[String], model: &SegmenterModel) -> Vec<UtteranceSegment> {
    let n = tokens.len();
    if n == 0 {
        return vec![UtteranceSegment {
            text: String::new(),
            span: Span::new(0, 0),
            da_labels: Vec::new(),
        }];
    }
    let max_len = model.max_len.max(1);
    let mut out = Vec::new();
    let mut seg_start = 0;
    let mut i = 0;
    while i < n {
        if i == seg_start && model.response_tokens.contains(&tokens[i]) && i + 1 < n {
            out.push(make_segment(tokens, Span::new(seg_start, i + 1), false));
            seg_start = i + 1;
            i += 1;
            continue;
        }
        if i > seg_start {
            if i - seg_start >= max_len {
                out.push(make_segment(tokens, Span::new(seg_start, i), false));
                seg_start = i;
                continue;
            }
            let prev = &tokens[i - 1];
            let wh_segment = model.wh_words.contains(&tokens[seg_start]);
            if SegmenterModel::phrase_at(&model.question_starters, tokens, i)
                && !wh_segment
                && !model.wh_words.contains(prev)
            {
                if model.coordinators.contains(prev) {
                    if i - 1 > seg_start {
                        out.push(make_segment(tokens, Span::new(seg_start, i), true));
                        seg_start = i;
                        continue;
                    }
                } else {
                    out.push(make_segment(tokens, Span::new(seg_start, i), false));
                    seg_start = i;
                    continue;
                }
            }
            if SegmenterModel::phrase_at(&model.discourse_markers, tokens, i) {
                out.push(make_segment(tokens, Span::new(seg_start, i), false));
                seg_start = i;
                continue;
            }
        }
        i += 1;
    }
    if seg_start < n {
        out.push(make_segment(tokens, Span::new(seg_start, n), false));
    }
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    fn owned(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    pub(crate) fn model() -> SegmenterModel {
        SegmenterModel::from_lists(
            &owned(&["yes", "yeah", "no", "nope", "okay", "ok", "sure"]),
            &owned(&["and", "but", "so"]),
            &owned(&["do you", "did you", "are you", "have you", "can you", "what about", "how about"]),
            &owned(&["by the way", "anyway"]),
            &owned(&["what", "why", "how", "who", "where", "when", "which", "if", "whether", "that"]),
        )
    }

    fn texts(s: &str) -> Vec<String> {
        segment_utterance(&text::tokenize(s), &model())
            .into_iter()
            .map(|s| s.text)
            .collect()
    }

    #[test]
    fn leading_affirmation_splits() {
        assert_eq!(texts("yes i love superheroes"), vec!["yes", "i love superheroes"]);
    }

    #[test]
    fn single_word_is_one_segment() {
        assert_eq!(texts("hello"), vec!["hello"]);
        assert_eq!(texts("yes"), vec!["yes"]);
    }

    #[test]
    fn coordinator_before_question_starter() {
        assert_eq!(
            texts("i like movies and do you like music"),
            vec!["i like movies", "do you like music"]
        );
        let segs = segment_utterance(&text::tokenize("i like movies and do you like music"), &model());
        assert_eq!(segs[0].span, Span::new(0, 4));
        assert_eq!(segs[1].span, Span::new(4, 8));
    }

    #[test]
    fn wh_questions_absorb_starters() {
        assert_eq!(texts("what do you think about kobe bryant"), vec!["what do you think about kobe bryant"]);
        assert_eq!(texts("what kind of movies do you like"), vec!["what kind of movies do you like"]);
    }

    #[test]
    fn multiple_cues() {
        assert_eq!(
            texts("yes they are very good do you like them"),
            vec!["yes", "they are very good", "do you like them"]
        );
    }

    #[test]
    fn empty_input() {
        let segs = segment_utterance(&[], &model());
        assert_eq!(segs.len(), 1);
        assert!(segs[0].text.is_empty());
    }

    #[test]
    fn long_input_is_capped() {
        let toks: Vec<String> = (0..60).map(|i| format!("w{i}")).collect();
        let segs = segment_utterance(&toks, &model());
        assert_eq!(segs.len(), 3);
        assert!(segs.iter().all(|s| s.span.len() <= 25));
    }

    fn vocab() -> impl Strategy<Value = String> {
        prop_oneof![
            Just("yes"), Just("no"), Just("and"), Just("but"), Just("do"), Just("you"),
            Just("what"), Just("about"), Just("by"), Just("the"), Just("way"), Just("anyway"),
            Just("i"), Just("like"), Just("movies"), Just("how"), Just("can"), Just("that"),
            Just("ok"), Just("so"),
        ]
        .prop_map(|s| s.to_string())
    }

    proptest! {
        #[test]
        fn spans_cover_and_resegmenting_is_identity(tokens in proptest::collection::vec(vocab(), 0..70)) {
            let m = model();
            let segs = segment_utterance(&tokens, &m);
            let mut expect = 0;
            for s in &segs {
                prop_assert_eq!(s.span.start, expect);
                expect = s.span.end;
            }
            prop_assert_eq!(expect, tokens.len());
            for s in &segs {
                let toks = text::tokenize(&s.text);
                let again = segment_utterance(&toks, &m);
                prop_assert_eq!(again.len(), 1, "segment {:?} re-split into {:?}", s.text, again);
                prop_assert_eq!(&again[0].text, &s.text);
            }
        }
    }
}
