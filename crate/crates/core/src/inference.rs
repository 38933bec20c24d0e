//! Forecasting, masking and attribution over a trained model.
//!
//! A prediction for entity x at slot t divides the influence-weighted sum of
//! its incoming neighbors' values at t by its self-weight p. The embedding
//! path routes each neighbor value through its out-embedding representation
//! at t (the log-scaled record entry, re-encoded and decoded); the direct
//! path reads the raw series. Neighbors absent at t fall back to their most
//! recent earlier value. Targets with no usable incoming influence fall back
//! to their own last observation.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::data::EntitySet;
use crate::embedding::{phi, EmbeddingModel};
use crate::error::{Error, Result};
use crate::graph::Sstkg;

/// How a prediction obtained its neighbor values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Decode neighbor values from their out-embedding record entries at the
    /// slot.
    Embedding,
    /// Read neighbor values from the raw series.
    Direct,
    /// The target's own last observation; used when no incoming influence
    /// is available (isolated target or everything masked).
    Persistence,
}

/// One incoming neighbor's share of a prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub source: String,
    pub influence: f64,
    /// Neighbor value at the predicted slot under the chosen method.
    pub value: f64,
    /// influence * value; contributions sum to predicted_raw * p.
    pub term: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub entity: String,
    pub slot: usize,
    /// Final forecast, clipped at zero.
    pub predicted: f64,
    /// Unclipped aggregate before the non-negativity clip.
    pub raw: f64,
    pub method: Method,
    pub contributions: Vec<Contribution>,
    /// Sources that were absent at the slot and used an earlier value.
    pub fallback_sources: Vec<String>,
    pub clipped: bool,
}

/// One edge of an attribution, heaviest influence first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainEntry {
    pub source: String,
    pub influence: f64,
    pub weight: f64,
    pub distance_km: f64,
    /// Influence scaled by the source's log-relative activity at the slot:
    /// influence * phi(value) / phi(overall); zero when the value is absent.
    pub temporal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub entity: String,
    pub slot: usize,
    pub self_weight: f64,
    pub entries: Vec<ExplainEntry>,
}

struct EdgeRef {
    source: usize,
    edge: usize,
}

/// Prediction engine over one (dataset, graph, model) triple. Construction
/// verifies the three artifacts describe the same world.
pub struct Forecaster<'a> {
    set: &'a EntitySet,
    graph: &'a Sstkg,
    model: &'a EmbeddingModel,
    in_index: Vec<Vec<EdgeRef>>,
    p: Vec<f64>,
    overalls: Vec<f64>,
}

impl<'a> Forecaster<'a> {
    pub fn new(set: &'a EntitySet, graph: &'a Sstkg, model: &'a EmbeddingModel) -> Result<Self> {
        let n = set.len();
        if graph.self_weight.len() != n {
            return Err(Error::InvalidConfig(format!(
                "graph carries {} entities, dataset has {n}",
                graph.self_weight.len()
            )));
        }
        if graph.edges.len() != model.influences.len() {
            return Err(Error::InvalidConfig(format!(
                "model carries {} influence edges, graph has {}",
                model.influences.len(),
                graph.edges.len()
            )));
        }
        let mut in_index: Vec<Vec<EdgeRef>> = (0..n).map(|_| Vec::new()).collect();
        for (k, (g, m)) in graph.edges.iter().zip(&model.influences).enumerate() {
            if g.source != m.source || g.target != m.target {
                return Err(Error::InvalidConfig(format!(
                    "edge {k} disagrees between graph ({} -> {}) and model ({} -> {})",
                    g.source, g.target, m.source, m.target
                )));
            }
            let source = set
                .index_of(&g.source)
                .ok_or_else(|| Error::UnknownEntity(g.source.clone()))?;
            let target = set
                .index_of(&g.target)
                .ok_or_else(|| Error::UnknownEntity(g.target.clone()))?;
            in_index[target].push(EdgeRef { source, edge: k });
        }
        let mut p = vec![0.0_f64; n];
        let mut overalls = vec![0.0_f64; n];
        for (i, e) in set.entities().iter().enumerate() {
            p[i] = graph.self_weight_of(&e.id)?;
            overalls[i] = *model
                .overalls
                .get(&e.id)
                .ok_or_else(|| Error::UnknownEntity(e.id.clone()))?;
            if !model.records.contains_key(&e.id) {
                return Err(Error::UnknownEntity(e.id.clone()));
            }
        }
        Ok(Self {
            set,
            graph,
            model,
            in_index,
            p,
            overalls,
        })
    }

    fn check_slot(&self, slot: usize) -> Result<()> {
        let count = self.set.time_index().slot_count;
        if slot >= count {
            return Err(Error::InvalidConfig(format!(
                "slot {slot} outside the recorded range 0..{count}"
            )));
        }
        Ok(())
    }

    /// Value of entity `i` at `slot` under `method`, plus whether an earlier
    /// value had to stand in. The embedding path re-encodes the observed
    /// record as its out-embedding record entry at the slot
    /// (phi(value)/phi(overall)) and decodes it back, the same representation
    /// training consumed; presence mirrors the raw series, so both paths
    /// agree on what counts as absent.
    fn source_value(&self, i: usize, slot: usize, method: Method) -> (f64, bool) {
        let entity = self.set.entity(i);
        if let Some(v) = entity.series.get(slot) {
            if method == Method::Embedding {
                let denom = phi(self.overalls[i]);
                if denom > 0.0 {
                    let entry = phi(v) / denom;
                    return ((entry * denom).exp_m1(), false);
                }
            }
            return (v, false);
        }
        let fallback = entity
            .series
            .last_present_before(slot)
            .or_else(|| entity.series.earliest_present())
            .unwrap_or(0.0);
        (fallback, true)
    }

    fn persistence(&self, target: usize, slot: usize) -> Prediction {
        let entity = self.set.entity(target);
        let value = entity
            .series
            .last_present_before(slot)
            .or_else(|| entity.series.earliest_present())
            .unwrap_or(0.0);
        Prediction {
            entity: entity.id.clone(),
            slot,
            predicted: value,
            raw: value,
            method: Method::Persistence,
            contributions: Vec::new(),
            fallback_sources: Vec::new(),
            clipped: false,
        }
    }

    /// Forecast with every incoming neighbor available.
    pub fn predict(&self, target: &str, slot: usize, method: Method) -> Result<Prediction> {
        self.predict_masked(target, slot, method, &BTreeSet::new())
    }

    /// Forecast with the neighbors in `masked` removed from the aggregation.
    /// The self-weight is not renormalized: a masked neighborhood loses its
    /// mass instead of redistributing it. Masking everything degrades to the
    /// target's own persistence forecast.
    pub fn predict_masked(
        &self,
        target: &str,
        slot: usize,
        method: Method,
        masked: &BTreeSet<String>,
    ) -> Result<Prediction> {
        self.check_slot(slot)?;
        let t = self
            .set
            .index_of(target)
            .ok_or_else(|| Error::UnknownEntity(target.to_string()))?;
        if method == Method::Persistence {
            return Ok(self.persistence(t, slot));
        }
        let p = self.p[t];
        let live: Vec<&EdgeRef> = self.in_index[t]
            .iter()
            .filter(|r| !masked.contains(&self.set.entity(r.source).id))
            .collect();
        if p <= 0.0 || live.is_empty() {
            return Ok(self.persistence(t, slot));
        }

        let mut contributions = Vec::with_capacity(live.len());
        let mut fallback_sources = Vec::new();
        let mut sum = 0.0_f64;
        for r in live {
            let source = self.set.entity(r.source);
            let influence = self.model.influences[r.edge].influence;
            let (value, fell_back) = self.source_value(r.source, slot, method);
            if fell_back {
                fallback_sources.push(source.id.clone());
            }
            let term = influence * value;
            sum += term;
            contributions.push(Contribution {
                source: source.id.clone(),
                influence,
                value,
                term,
            });
        }
        let raw = sum / p;
        Ok(Prediction {
            entity: target.to_string(),
            slot,
            predicted: raw.max(0.0),
            raw,
            method,
            contributions,
            fallback_sources,
            clipped: raw < 0.0,
        })
    }

    /// Influence of one edge modulated by the source's activity at `slot`.
    pub fn temporal_relation(&self, source: &str, target: &str, slot: usize) -> Result<f64> {
        self.check_slot(slot)?;
        let s = self
            .set
            .index_of(source)
            .ok_or_else(|| Error::UnknownEntity(source.to_string()))?;
        let t = self
            .set
            .index_of(target)
            .ok_or_else(|| Error::UnknownEntity(target.to_string()))?;
        let r = self.in_index[t]
            .iter()
            .find(|r| r.source == s)
            .ok_or_else(|| Error::MissingEdge {
                from: source.to_string(),
                to: target.to_string(),
            })?;
        let denom = phi(self.overalls[s]);
        if denom <= 0.0 {
            return Ok(0.0);
        }
        let value = match self.set.entity(s).series.get(slot) {
            Some(v) => v,
            None => return Ok(0.0),
        };
        Ok(self.model.influences[r.edge].influence * phi(value) / denom)
    }

    /// Attribution of `target`'s forecast at `slot`: every incoming edge
    /// with its influence, spatial weight, distance and temporal relation,
    /// strongest absolute influence first.
    pub fn explain(&self, target: &str, slot: usize) -> Result<Explanation> {
        self.check_slot(slot)?;
        let t = self
            .set
            .index_of(target)
            .ok_or_else(|| Error::UnknownEntity(target.to_string()))?;
        if self.in_index[t].is_empty() {
            return Err(Error::NoIncomingInfluence(target.to_string()));
        }
        let mut entries = Vec::with_capacity(self.in_index[t].len());
        for r in &self.in_index[t] {
            let graph_edge = &self.graph.edges[r.edge];
            let source = &self.set.entity(r.source).id;
            entries.push(ExplainEntry {
                source: source.clone(),
                influence: self.model.influences[r.edge].influence,
                weight: graph_edge.weight,
                distance_km: graph_edge.distance_km,
                temporal: self.temporal_relation(source, target, slot)?,
            });
        }
        entries.sort_by(|a, b| {
            b.influence
                .abs()
                .total_cmp(&a.influence.abs())
                .then_with(|| a.source.cmp(&b.source))
        });
        Ok(Explanation {
            entity: target.to_string(),
            slot,
            self_weight: self.p[t],
            entries,
        })
    }

    /// (distance, influence) pairs of every edge, the raw material of the
    /// influence-versus-distance scatter.
    pub fn influence_scatter(&self) -> Vec<(String, f64, f64)> {
        self.model
            .influences
            .iter()
            .map(|e| (e.source.clone(), e.distance_km, e.influence))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{BoundingBox, GeoPoint, SyntheticSpec};
    use crate::data::generate_synthetic;
    use crate::embedding::{train, EmbeddingConfig};
    use crate::graph::{build_graph, BuildConfig};
    use crate::data::SlotRange;

    fn pipeline() -> (crate::data::EntitySet, Sstkg, EmbeddingModel) {
        let spec = SyntheticSpec {
            seed: 21,
            entity_count: 30,
            slot_count: 20,
            bounding_box: BoundingBox {
                min: GeoPoint::new(40.0, -75.0).unwrap(),
                max: GeoPoint::new(40.15, -74.85).unwrap(),
            },
            category_pool: vec!["cafe".into(), "gym".into()],
            influence_density: 0.5,
            noise_sigma: 0.0,
        };
        let world = generate_synthetic(&spec, 2.0).unwrap();
        let cfg = BuildConfig::new(SlotRange::new(0, 20).unwrap());
        let graph = build_graph(&world.entities, &cfg).unwrap().graph;
        let emb = EmbeddingConfig {
            static_dim: 4,
            record_window: 6,
            epochs_embedding: 2,
            epochs_influence: 0,
            ..EmbeddingConfig::default()
        };
        let model = train(&world.entities, &graph, &emb, 21).unwrap().model;
        (world.entities, graph, model)
    }

    #[test]
    fn embedding_and_direct_paths_agree_at_any_present_slot() {
        let (set, _, _) = pipeline();
        let cfg = BuildConfig::new(SlotRange::new(0, 14).unwrap());
        let graph = build_graph(&set, &cfg).unwrap().graph;
        let emb = EmbeddingConfig {
            static_dim: 4,
            record_window: 6,
            epochs_embedding: 0,
            epochs_influence: 0,
            ..EmbeddingConfig::default()
        };
        let model = train(&set, &graph, &emb, 7).unwrap().model;
        let f = Forecaster::new(&set, &graph, &model).unwrap();
        let mut compared = 0;
        // 10 and 13 sit inside the build window, 19 beyond it; the embedding
        // path must serve all three from the slot's own records.
        for e in set.entities() {
            for slot in [10usize, 13, 19] {
                let emb = f.predict(&e.id, slot, Method::Embedding).unwrap();
                if emb.method != Method::Embedding || !emb.fallback_sources.is_empty() {
                    continue;
                }
                let dir = f.predict(&e.id, slot, Method::Direct).unwrap();
                let scale = dir.predicted.abs().max(1.0);
                assert!(
                    (emb.predicted - dir.predicted).abs() <= 1e-6 * scale,
                    "{} slot {slot}: {} vs {}",
                    e.id,
                    emb.predicted,
                    dir.predicted
                );
                compared += 1;
            }
        }
        assert!(compared > 0);
    }

    #[test]
    fn contributions_sum_to_the_scaled_prediction() {
        let (set, graph, model) = pipeline();
        let f = Forecaster::new(&set, &graph, &model).unwrap();
        for e in set.entities() {
            let pred = f.predict(&e.id, 10, Method::Direct).unwrap();
            if pred.method == Method::Persistence {
                continue;
            }
            let total: f64 = pred.contributions.iter().map(|c| c.term).sum();
            let p = graph.self_weight_of(&e.id).unwrap();
            assert!(
                (total - pred.raw * p).abs() <= 1e-12 * total.abs().max(1.0),
                "{}",
                e.id
            );
        }
    }

    #[test]
    fn noise_free_direct_predictions_recover_derived_series() {
        let spec = SyntheticSpec {
            seed: 33,
            entity_count: 40,
            slot_count: 24,
            bounding_box: BoundingBox {
                min: GeoPoint::new(40.0, -75.0).unwrap(),
                max: GeoPoint::new(40.15, -74.85).unwrap(),
            },
            category_pool: vec!["cafe".into()],
            influence_density: 0.5,
            noise_sigma: 0.0,
        };
        let world = generate_synthetic(&spec, 2.0).unwrap();
        let cfg = BuildConfig::new(SlotRange::new(0, 24).unwrap());
        let graph = build_graph(&world.entities, &cfg).unwrap().graph;
        let emb = EmbeddingConfig {
            epochs_embedding: 0,
            epochs_influence: 0,
            ..EmbeddingConfig::default()
        };
        let model = train(&world.entities, &graph, &emb, 33).unwrap().model;
        let f = Forecaster::new(&world.entities, &graph, &model).unwrap();
        assert!(!world.ground_truth.derived_targets.is_empty());
        for id in &world.ground_truth.derived_targets {
            let real = world.entities.by_id(id).unwrap().series.get(12).unwrap();
            let pred = f.predict(id, 12, Method::Direct).unwrap();
            assert_eq!(pred.method, Method::Direct);
            // Tolerance mirrors the ridge bias of the influence fit.
            assert!(
                (pred.predicted - real).abs() <= 1e-4 * real.max(1.0),
                "{id}: {} vs {real}",
                pred.predicted
            );
        }
    }

    #[test]
    fn masking_everything_degrades_to_persistence() {
        let (set, graph, model) = pipeline();
        let f = Forecaster::new(&set, &graph, &model).unwrap();
        let target = model
            .influences
            .first()
            .map(|e| e.target.clone())
            .expect("pipeline world has edges");
        let masked: BTreeSet<String> = graph
            .in_edges(&target)
            .map(|e| e.source.clone())
            .collect();
        let pred = f.predict_masked(&target, 10, Method::Direct, &masked).unwrap();
        assert_eq!(pred.method, Method::Persistence);
        let own = set.by_id(&target).unwrap().series.get(9).unwrap();
        assert_eq!(pred.predicted, own);
    }

    #[test]
    fn masking_drops_only_the_named_source() {
        let (set, graph, model) = pipeline();
        let f = Forecaster::new(&set, &graph, &model).unwrap();
        // Find a target with at least two incoming edges.
        let target = (0..set.len())
            .map(|i| &set.entity(i).id)
            .find(|id| graph.in_edges(id).count() >= 2)
            .expect("pipeline world has a multi-source target")
            .clone();
        let full = f.predict(&target, 10, Method::Direct).unwrap();
        let dropped = full.contributions[0].source.clone();
        let masked: BTreeSet<String> = [dropped.clone()].into();
        let part = f.predict_masked(&target, 10, Method::Direct, &masked).unwrap();
        assert_eq!(part.contributions.len() + 1, full.contributions.len());
        assert!(part.contributions.iter().all(|c| c.source != dropped));
        let expected = full.raw - full.contributions[0].term / graph.self_weight_of(&target).unwrap();
        assert!((part.raw - expected).abs() <= 1e-9 * expected.abs().max(1.0));
    }

    #[test]
    fn explain_sorts_by_absolute_influence() {
        let (set, graph, model) = pipeline();
        let f = Forecaster::new(&set, &graph, &model).unwrap();
        let target = (0..set.len())
            .map(|i| &set.entity(i).id)
            .find(|id| graph.in_edges(id).count() >= 2)
            .unwrap()
            .clone();
        let ex = f.explain(&target, 10).unwrap();
        for w in ex.entries.windows(2) {
            assert!(w[0].influence.abs() >= w[1].influence.abs());
        }
        let isolated = (0..set.len())
            .map(|i| &set.entity(i).id)
            .find(|id| graph.in_edges(id).count() == 0);
        if let Some(id) = isolated {
            assert!(matches!(
                f.explain(id, 10),
                Err(Error::NoIncomingInfluence(_))
            ));
        }
    }

    #[test]
    fn out_of_range_slot_is_rejected() {
        let (set, graph, model) = pipeline();
        let f = Forecaster::new(&set, &graph, &model).unwrap();
        let id = &set.entity(0).id;
        assert!(f.predict(id, 20, Method::Direct).is_err());
    }

    #[test]
    fn mismatched_artifacts_are_rejected() {
        let (set, graph, model) = pipeline();
        let mut wrong = model.clone();
        wrong.influences.pop();
        assert!(Forecaster::new(&set, &graph, &wrong).is_err());
        let mut swapped = model.clone();
        if swapped.influences.len() >= 2 {
            swapped.influences.swap(0, 1);
            assert!(Forecaster::new(&set, &graph, &swapped).is_err());
        }
    }
}
