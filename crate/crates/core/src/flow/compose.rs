use rand::Rng;

use super::callbacks::{CallbackContext, CallbackRegistry};
use super::graph::{Part, SegmentSpec};
use crate::types::join_parts;

pub const MAX_CANDIDATES: usize = 5;
const SAMPLE_ATTEMPTS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Composed {
    pub opener: String,
    pub body: String,
    pub handoff: String,
}

impl Composed {
    pub fn text(&self) -> String {
        join_parts([Some(self.opener.as_str()), Some(self.body.as_str()), Some(self.handoff.as_str())])
    }
}

/// Alternatives for each segment, or `None` if a callback failed.
pub fn segment_options(
    segments: &[SegmentSpec],
    callbacks: &CallbackRegistry,
    ctx: &CallbackContext<'_>,
) -> Option<Vec<(Part, Vec<String>)>> {
    segments
        .iter()
        .map(|s| {
            let options = match &s.callback {
                Some(name) => callbacks.get(name)?.call(ctx, &s.args)?,
                None => s.templates.clone(),
            };
            (!options.is_empty()).then_some((s.part, options))
        })
        .collect()
}

fn build(options: &[(Part, Vec<String>)], choice: &[usize]) -> Composed {
    let mut parts: [Vec<&str>; 3] = Default::default();
    for ((part, opts), &i) in options.iter().zip(choice) {
        let slot = match part {
            Part::Opener => 0,
            Part::Body => 1,
            Part::Handoff => 2,
        };
        parts[slot].push(opts[i].as_str());
    }
    let j = |v: &Vec<&str>| join_parts(v.iter().map(|s| Some(*s)));
    Composed {
        opener: j(&parts[0]),
        body: j(&parts[1]),
        handoff: j(&parts[2]),
    }
}

/// Number of distinct choice vectors, saturating.
pub fn product(options: &[(Part, Vec<String>)]) -> usize {
    options
        .iter()
        .fold(1usize, |acc, (_, o)| acc.saturating_mul(o.len()))
}

/// Every combination in odometer order, with duplicate texts removed.
pub fn enumerate(options: &[(Part, Vec<String>)]) -> Vec<Composed> {
    let mut out: Vec<Composed> = Vec::new();
    if options.iter().any(|(_, o)| o.is_empty()) {
        return out;
    }
    let mut choice = vec![0usize; options.len()];
    loop {
        let c = build(options, &choice);
        if !out.contains(&c) {
            out.push(c);
        }
        let mut k = options.len();
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            choice[k] += 1;
            if choice[k] < options[k].1.len() {
                break;
            }
            choice[k] = 0;
        }
    }
}

/// Up to five distinct candidates: all of them when the product of option
/// counts is at most five, otherwise a random sample.
pub fn compose<R: Rng + ?Sized>(options: &[(Part, Vec<String>)], rng: &mut R) -> Vec<Composed> {
    if product(options) <= MAX_CANDIDATES {
        return enumerate(options);
    }
    let mut out: Vec<Composed> = Vec::new();
    for _ in 0..SAMPLE_ATTEMPTS {
        if out.len() == MAX_CANDIDATES {
            break;
        }
        let choice: Vec<usize> = options.iter().map(|(_, o)| rng.random_range(0..o.len())).collect();
        let c = build(options, &choice);
        if !out.contains(&c) {
            out.push(c);
        }
    }
    out
}
