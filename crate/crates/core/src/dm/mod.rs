//! The dialogue manager: action selection, constraints, initiative,
//! dispatch, pool building, ranking, fallback, grounding and assembly.

pub mod action;
pub mod builder;
pub mod constraints;
pub mod dispatch;
pub mod fallback;
pub mod ground;
pub mod initiative;
pub mod pool;
pub mod rank;
pub mod ssml;
pub mod trace;

pub use action::{decide_action, ActionCues};
pub use builder::assemble;
pub use constraints::{generate_constraints, ConstraintHardness, Hardness, ResponseConstraints};
pub use dispatch::RgRegistry;
pub use fallback::{fallback, FallbackResponse, FallbackTemplates};
pub use ground::{ground, GroundingTemplates};
pub use initiative::{choose_initiative, InitiativeChoice};
pub use pool::{collect_outputs, filter_pool, PoolBudget, ProfanityFilter, RemovalReason, RepetitionFilter, ResponsePool};
pub use rank::{tier, CandidateScorer, Ranker};
pub use ssml::{inject_ssml, SsmlConfig, SsmlParam};
pub use trace::TurnTrace;
