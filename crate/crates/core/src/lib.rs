//! Drug-review sentiment pipeline: corpus ingest and cleaning, sentence
//! embeddings, SMOTE rebalancing, stratified splitting, five classifier
//! families, and precision/recall/F1 reporting with training curves.

pub mod classifiers;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod metrics;
pub mod pipeline;
pub mod resample;
pub mod rnn;
pub mod seed;

pub use error::{Error, Result};
