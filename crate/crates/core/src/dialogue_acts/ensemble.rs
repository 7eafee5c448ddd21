use super::{tag_ngram, DaLabel, NgramModel, RegexTagger, TaggedLabel};
use crate::scalar::logistic;
use crate::text;

const OPINION_CUES: [&[&str]; 7] = [
    &["i", "think"],
    &["i", "feel"],
    &["i", "believe"],
    &["i", "love"],
    &["i", "hate"],
    &["in", "my", "opinion"],
    &["i", "guess"],
];

/// Rule intents: cheap cues that neither tagger covers well.
pub fn heuristic_intents(segment: &str) -> Vec<DaLabel> {
    let toks = text::tokenize(segment);
    let mut out = Vec::new();
    let has = |cue: &[&str]| {
        let cue: Vec<String> = cue.iter().map(|s| s.to_string()).collect();
        text::find_token_run(&toks, &cue).is_some()
    };
    if OPINION_CUES.iter().any(|c| has(c)) {
        out.push(DaLabel::Opinion);
    }
    if has(&["thank", "you"]) || toks.first().map(|t| t == "thanks").unwrap_or(false) {
        out.push(DaLabel::Acknowledgement);
    }
    out
}

/// Merges the members. Regex hits come first and suppress the n-gram vote;
/// otherwise the n-gram label leads. Rule intents are appended. An empty
/// result becomes `statement-non-opinion`.
pub fn ensemble_combine(
    regex_out: &[TaggedLabel],
    ngram_out: Option<(DaLabel, f64)>,
    heuristic: &[DaLabel],
) -> Vec<TaggedLabel> {
    let mut out: Vec<TaggedLabel> = Vec::new();
    let mut push = |t: TaggedLabel| {
        if !out.iter().any(|o| o.label == t.label) {
            out.push(t);
        }
    };
    if !regex_out.is_empty() {
        regex_out.iter().copied().for_each(&mut push);
    } else if let Some((label, margin)) = ngram_out {
        push(TaggedLabel::new(label, logistic(margin)));
    }
    for h in heuristic {
        push(TaggedLabel::new(*h, 0.5));
    }
    if out.is_empty() {
        out.push(TaggedLabel::new(DaLabel::StatementNonOpinion, 0.5));
    }
    out
}

/// The assembled per-segment tagger.
#[derive(Debug, Clone)]
pub struct DaTagger {
    pub regex: RegexTagger,
    pub model: Option<NgramModel<f64>>,
}

impl DaTagger {
    pub fn new(regex: RegexTagger, model: Option<NgramModel<f64>>) -> Self {
        DaTagger { regex, model }
    }

    pub fn tag(&self, segment: &str) -> Vec<TaggedLabel> {
        let regex_out = self.regex.tag(segment);
        let ngram_out = self.model.as_ref().map(|m| tag_ngram(segment, m));
        ensemble_combine(&regex_out, ngram_out, &heuristic_intents(segment))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn regex_takes_precedence() {
        let out = ensemble_combine(
            &[TaggedLabel::new(DaLabel::ChangeTopic, 1.0)],
            Some((DaLabel::Comment, 2.0)),
            &[],
        );
        assert_eq!(out[0].label, DaLabel::ChangeTopic);
        assert!(!out.iter().any(|t| t.label == DaLabel::Comment));
    }

    #[test]
    fn ngram_fills_when_regex_silent() {
        let out = ensemble_combine(&[], Some((DaLabel::YesAnswer, 0.0)), &[]);
        assert_eq!(out[0].label, DaLabel::YesAnswer);
        assert_eq!(out[0].confidence, 0.5);
    }

    #[test]
    fn nothing_means_statement() {
        let out = ensemble_combine(&[], None, &[]);
        assert_eq!(out, vec![TaggedLabel::new(DaLabel::StatementNonOpinion, 0.5)]);
    }

    #[test]
    fn opinion_cue() {
        assert_eq!(heuristic_intents("well i think it's great"), vec![DaLabel::Opinion]);
        assert!(heuristic_intents("i went home").is_empty());
    }

    fn any_label() -> impl Strategy<Value = DaLabel> {
        (0..DaLabel::ALL.len()).prop_map(|i| DaLabel::ALL[i])
    }

    proptest! {
        #[test]
        fn regex_first_label_always_leads(
            regex in proptest::collection::vec(any_label(), 0..4),
            ngram in proptest::option::of((any_label(), -5.0f64..5.0)),
            heur in proptest::collection::vec(any_label(), 0..3),
        ) {
            let tagged: Vec<TaggedLabel> = regex.iter().map(|l| TaggedLabel::new(*l, 1.0)).collect();
            let out = ensemble_combine(&tagged, ngram, &heur);
            prop_assert!(!out.is_empty());
            if let Some(first) = regex.first() {
                prop_assert_eq!(out[0].label, *first);
            }
        }
    }
}
