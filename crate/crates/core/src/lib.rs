//! Resume dataset construction, LLM-backed resume parsing and evaluation.
//!
//! The crate covers the whole loop: normalize and merge real and synthetic
//! resumes into one JSON schema, split and export fine-tuning artifacts,
//! parse resume text through any chat-completions endpoint, and score
//! predictions with field-level edit similarity, embedding cosine, smoothed
//! BLEU-4 and combined ROUGE.

pub mod dataset;
pub mod error;
pub mod evaluator;
pub mod instruction;
pub mod llm_gateway;
pub mod metrics;
pub mod normalize;
pub mod pipeline;
pub mod schema;
pub mod synth;

pub use error::{AliasError, DatasetError, EvalError, GatewayError, PipelineError, SchemaError, SynthError};
pub use schema::{EducationEntry, ExperienceEntry, FlatView, ResumeRecord};
