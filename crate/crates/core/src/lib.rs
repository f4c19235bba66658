//! Password semantics toolkit: segments passwords into typed semantic
//! factors, trains a probabilistic grammar over them with principled
//! smoothing for unseen factors, enumerates guesses in descending
//! probability order, and evaluates cracking coverage and cross-corpus
//! similarity.

pub mod analytics;
pub mod corpus;
pub mod evaluator;
pub mod format;
pub mod generator;
pub mod model;
pub mod segmenter;
pub mod trainer;
