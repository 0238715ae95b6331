//! Knowledge-tree guided extraction and integration of marine Pb measurements.

pub mod classify;
pub mod corpus;
pub mod digest;
pub mod evaluate;
pub mod extract;
pub mod gateway;
pub mod harmonize;
pub mod knowledge_tree;
pub mod pipeline;
pub mod stage;
pub mod store;
pub mod validate;

pub use classify::{PaperCategory, TableCategory};
pub use corpus::{ParsedPaper, TableBlock};
pub use extract::{MeasurementType, PbRecord, Phase, Provenance, SourceKind};
pub use knowledge_tree::KnowledgeTree;
pub use pipeline::{run_pipeline, PipelineConfig, PipelineOutput, RunManifest};
