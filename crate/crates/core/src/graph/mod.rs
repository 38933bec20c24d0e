//! Graph construction: neighborhoods, weights, self-weights, influence
//! regression and pruning.

mod build;
mod geo;
mod regression;
mod weights;

pub use build::{build_graph, BuildOutput};
pub use geo::{haversine_km, neighbors_within, Neighbor, EARTH_RADIUS_KM, MIN_DISTANCE_KM};
pub use regression::{fit_influences, RegressionNeighbor};
pub use weights::{compute_self_weights, compute_weight, WeightedPair};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{SlotRange, TimeIndex};
use crate::error::{Error, Result};

/// Construction parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildConfig {
    /// Neighborhood radius in kilometers.
    pub distance_threshold_km: f64,
    /// Ridge strength of the influence regression.
    pub ridge_lambda: f64,
    /// Edges with |influence| below this are pruned after regression.
    pub prune_epsilon: f64,
    /// Slots used for overall records and the regression.
    pub training_window: SlotRange,
    /// Construction worker threads; output is identical for any value.
    pub workers: usize,
}

impl BuildConfig {
    /// Defaults tuned for daily retail-style data; sparse sensor grids
    /// typically need a 4 km threshold instead.
    pub fn new(training_window: SlotRange) -> Self {
        Self {
            distance_threshold_km: 2.0,
            ridge_lambda: 1e-3,
            prune_epsilon: 1e-4,
            training_window,
            workers: 1,
        }
    }

    pub fn with_threshold_km(mut self, km: f64) -> Self {
        self.distance_threshold_km = km;
        self
    }

    pub fn with_ridge_lambda(mut self, lambda: f64) -> Self {
        self.ridge_lambda = lambda;
        self
    }

    pub fn with_prune_epsilon(mut self, epsilon: f64) -> Self {
        self.prune_epsilon = epsilon;
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn validate(&self, slot_count: usize) -> Result<()> {
        if !self.distance_threshold_km.is_finite() || self.distance_threshold_km <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "distance_threshold_km {} must be a positive finite real",
                self.distance_threshold_km
            )));
        }
        if !self.ridge_lambda.is_finite() || self.ridge_lambda < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "ridge_lambda {} must be a non-negative finite real",
                self.ridge_lambda
            )));
        }
        if self.prune_epsilon.is_nan() || self.prune_epsilon < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "prune_epsilon {} must be non-negative",
                self.prune_epsilon
            )));
        }
        if self.training_window.is_empty() || self.training_window.end > slot_count {
            return Err(Error::InvalidConfig(format!(
                "training window {}..{} outside slot grid of {} slots",
                self.training_window.start, self.training_window.end, slot_count
            )));
        }
        if self.workers == 0 {
            return Err(Error::InvalidConfig("workers must be at least 1".into()));
        }
        Ok(())
    }
}

/// Directed influence edge. Weight is the spatial prior, influence the
/// regressed strength (signed: suppliers positive, competitors negative).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceEdge {
    pub source: String,
    pub target: String,
    pub weight: f64,
    pub influence: f64,
    pub distance_km: f64,
}

/// The constructed graph. Edges are sorted by (source, target); self-weights
/// sum to 1 whenever at least one weighted pair existed before pruning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sstkg {
    pub time_index: TimeIndex,
    pub config: BuildConfig,
    pub self_weight: BTreeMap<String, f64>,
    pub edges: Vec<InfluenceEdge>,
}

impl Sstkg {
    pub fn self_weight_of(&self, id: &str) -> Result<f64> {
        self.self_weight
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownEntity(id.to_string()))
    }

    /// Incoming edges of `target` in source order.
    pub fn in_edges<'a>(&'a self, target: &'a str) -> impl Iterator<Item = &'a InfluenceEdge> {
        self.edges.iter().filter(move |e| e.target == target)
    }

    pub fn out_edges<'a>(&'a self, source: &'a str) -> impl Iterator<Item = &'a InfluenceEdge> {
        self.edges.iter().filter(move |e| e.source == source)
    }

    pub fn edge(&self, source: &str, target: &str) -> Result<&InfluenceEdge> {
        self.edges
            .iter()
            .find(|e| e.source == source && e.target == target)
            .ok_or_else(|| Error::MissingEdge {
                from: source.to_string(),
                to: target.to_string(),
            })
    }

    /// An entity is isolated when nothing flows into it.
    pub fn is_isolated(&self, id: &str) -> Result<bool> {
        Ok(self.self_weight_of(id)? == 0.0)
    }

    /// Mean influence over all edges; the corruption baseline for training.
    pub fn mean_influence(&self) -> Option<f64> {
        if self.edges.is_empty() {
            return None;
        }
        Some(self.edges.iter().map(|e| e.influence).sum::<f64>() / self.edges.len() as f64)
    }
}
