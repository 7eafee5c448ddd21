use super::ssml::{inject_ssml, params_for, SsmlConfig};
use crate::text;
use crate::types::{join_parts, ResponseCandidate, SystemResponse};

fn clean(part: Option<&str>) -> Option<String> {
    part.map(text::clean_spacing).filter(|p| !p.is_empty())
}

/// Puts the parts in order (ground, opener, body, hand-off), tidies spacing
/// and punctuation and adds SSML. A hand-over opener from an RG that just
/// finished goes in front of the candidate's own opener.
pub fn assemble(
    ground: Option<&str>,
    candidate: &ResponseCandidate,
    handover_opener: Option<&str>,
    ssml: &SsmlConfig,
) -> SystemResponse {
    let opener = join_parts([handover_opener, candidate.opener.as_deref()]);
    let mut response = SystemResponse {
        ground: clean(ground),
        opener: clean(Some(&opener)),
        body: text::clean_spacing(&candidate.body),
        handoff: clean(candidate.handoff.as_deref()),
        source_rg: candidate.rg.clone(),
        ssml: None,
    };
    let full = response.text();
    let params = params_for(&full, candidate.factual, candidate.excited, ssml);
    if !params.is_empty() {
        response.ssml = Some(inject_ssml(&full, &params, ssml));
    }
    response
}
