pub mod dialogue_acts;
pub mod dm;
pub mod engine;
pub mod entity_linking;
pub mod error;
pub mod flow;
pub mod kg;
pub mod nlu;
pub mod pack;
pub mod replay;
pub mod retrieval;
pub mod rg;
pub mod scalar;
pub mod state;
pub mod system_rgs;
pub mod text;
pub mod topic;
pub mod types;

pub use error::{Error, Result};
pub use engine::{Engine, TurnResult};
pub use pack::{EngineConfig, Pack};

pub type DaModel = dialogue_acts::NgramModel<f64>;
pub type DaModelF32 = dialogue_acts::NgramModel<f32>;
pub type BioModel = entity_linking::BioWeights<f64>;
pub type BioModelF32 = entity_linking::BioWeights<f32>;
pub type RerankModel = entity_linking::Reranker<f64>;
pub type RerankModelF32 = entity_linking::Reranker<f32>;
