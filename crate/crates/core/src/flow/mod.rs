//! Authored conversation flows: graphs of nodes grouped into miniflows.

pub mod callbacks;
pub mod compose;
pub mod exec;
pub mod graph;
pub mod rg;

pub use callbacks::{CallbackContext, CallbackRegistry, FlowCallback};
pub use compose::{compose, enumerate, Composed, MAX_CANDIDATES};
pub use exec::{is_exhausted, observe_foreign, step, FlowState, StepEvent, StepInput, StepResult, MAX_FOREIGN_TURNS};
pub use graph::{Edge, ExitSpec, FlowGraph, FlowNode, Miniflow, Ordering, Part, SegmentSpec, DEFAULT_CAP};
pub use rg::FlowRg;
