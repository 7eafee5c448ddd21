//! Entity linking: an ensemble path (gazetteer lookup, common-phrase
//! suppression, topic-restricted types) and a trained path (BIO tagging,
//! candidate pool, reranking).

pub mod bio;
pub mod common;
pub mod eval;
pub mod gazetteer;
pub mod link;
pub mod pool;
pub mod rerank;

pub use bio::{bio_decode, bio_features, bio_train, parse_bio_corpus, sequence_score, viterbi, BioExample, BioTag, BioWeights};
pub use common::{suppress_common, CommonPhraseList, DEFAULT_CUTOFF};
pub use eval::{evaluate, parse_el_corpus, AnnotatedUtterance, ElScores, Prf};
pub use gazetteer::{load_gazetteer, parse_gazetteer, GazetteerIndex, GazetteerRecord, ScoredCandidate};
pub use link::{query_candidates, EntityLinker, LinkContext, LinkPath, LinkerConfig, MentionCandidates};
pub use pool::{LookupEntry, LookupIndex};
pub use rerank::{RerankContext, RerankExample, Reranker};
