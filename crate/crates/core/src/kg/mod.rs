//! Knowledge-graph responses over a local triple store.

pub mod rg;
pub mod store;
pub mod template;

pub use rg::{resolve_focus, FocusResolution, KgMove, KgPack, KgReply, KgRg, KgState, Pending, PendingKind};
pub use store::{Aggregate, ObjectKind, RelationRegistry, Triple, TripleStore};
pub use template::{realize, sparse_guard, KgTemplates, Presentation, Realization, RelationTemplate, TemplateKind};
