//! Player form embeddings from pitch-by-pitch baseball data.
//!
//! The pipeline tokenizes each pitch as a change of game state, trains a
//! transformer encoder with masked-token and contrastive objectives, and
//! clusters the resulting 72-dimensional form vectors against a baseline
//! built from traditional statistics.

pub mod gamestate;
pub mod ingest;
pub mod stats;
pub mod dataset;
pub mod model;
pub mod analytics;
pub mod pipeline;
