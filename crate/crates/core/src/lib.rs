//! Core of the perspective-aware XR assistant: personal knowledge graphs
//! (Chronicles), the path-query language over them, text embeddings, the
//! scene model, and the Scribe / Reasoner / Synthesizer / Monitor stages.

pub mod chronicle;
pub mod embedding;
pub mod query;
pub mod scene;
pub mod synthesizer;
pub mod monitor;
pub mod scribe;
pub mod reasoner;
