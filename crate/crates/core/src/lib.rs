//! Spatio-temporal knowledge graph forecasting over located entities.
//!
//! The crate turns per-entity visit records into a weighted influence graph,
//! trains compact embeddings on top of it, and serves one-step forecasts
//! with per-neighbor attributions. Pipeline stages live in their own
//! modules:
//!
//! * [`data`]: CSV ingestion, time slotting, synthetic-world generation
//! * [`graph`]: spatial weights, self-weights, influence regression
//! * [`embedding`]: static/record embeddings and two-phase training
//! * [`inference`]: forecasting, masking, attribution
//! * [`metrics`] and [`stats`]: evaluation and significance tests
//! * [`persist`]: canonical, hash-verified JSON artifacts

pub mod data;
pub mod embedding;
pub mod error;
pub mod graph;
mod hash;
pub mod inference;
pub mod metrics;
pub mod persist;
pub mod stats;

pub use error::{Error, Result};
