//! Two-phase training driver.
//!
//! Phase one moves static slices against the fixed entity-swap plan; phase
//! two moves influence values against graph-mean corruptions, with the mean
//! frozen per batch. Updates are plain gradient descent on the batch-summed
//! loss. All randomness is spent building the plan, so a (dataset, graph,
//! config, seed) tuple trains to bit-identical results every time.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::loss::{phase1_gradients, phase2_gradients};
use super::sampling::build_plan;
use super::space::{InRef, TrainSpace};
use super::{category_vector, phi, EmbeddingConfig, EmbeddingModel, RecordSlice};
use crate::data::EntitySet;
use crate::error::{Error, Result};
use crate::graph::Sstkg;

/// Batch-summed loss per epoch, evaluated before each batch update.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainingTrace {
    pub embedding_epoch_loss: Vec<f64>,
    pub influence_epoch_loss: Vec<f64>,
}

#[derive(Debug)]
pub struct TrainOutput {
    pub model: EmbeddingModel,
    pub trace: TrainingTrace,
}

/// Trains embeddings and influences for `graph` over its build window.
pub fn train(
    set: &EntitySet,
    graph: &Sstkg,
    config: &EmbeddingConfig,
    seed: u64,
) -> Result<TrainOutput> {
    config.validate()?;
    let n = set.len();
    if graph.self_weight.len() != n {
        return Err(Error::InvalidConfig(format!(
            "graph carries {} entities, dataset has {n}",
            graph.self_weight.len()
        )));
    }
    let window = graph.config.training_window;
    let overalls = set.window_overalls(window);
    let ids: Vec<String> = set.entities().iter().map(|e| e.id.clone()).collect();

    let mut p = vec![0.0_f64; n];
    for (i, e) in set.entities().iter().enumerate() {
        p[i] = graph.self_weight_of(&e.id)?;
    }

    let mut influences = Vec::with_capacity(graph.edges.len());
    let mut in_edges: Vec<Vec<InRef>> = vec![Vec::new(); n];
    for (k, e) in graph.edges.iter().enumerate() {
        let source = set
            .index_of(&e.source)
            .ok_or_else(|| Error::UnknownEntity(e.source.clone()))?;
        let target = set
            .index_of(&e.target)
            .ok_or_else(|| Error::UnknownEntity(e.target.clone()))?;
        influences.push(e.influence);
        in_edges[target].push(InRef { source, edge: k });
    }
    // Graph edges are (source, target)-sorted, so each list arrives in
    // ascending source order already.
    for list in &in_edges {
        debug_assert!(list.windows(2).all(|w| w[0].source < w[1].source));
    }

    let statics: Vec<Vec<f64>> = set
        .entities()
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let mut v = category_vector(&e.category, config.static_dim, seed);
            let scale = phi(overalls[i]);
            for x in v.iter_mut() {
                *x *= scale;
            }
            v
        })
        .collect();
    let slices: Vec<RecordSlice> = set
        .entities()
        .iter()
        .enumerate()
        .map(|(i, e)| RecordSlice::build(&e.series, window, config.record_window, overalls[i]))
        .collect();

    let mut space = TrainSpace {
        statics,
        records: slices.iter().map(|r| r.entries.clone()).collect(),
        p,
        influences,
        in_edges,
    };

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let plan = build_plan(&space, &overalls, &ids, config, &mut rng)?;

    let mut trace = TrainingTrace {
        embedding_epoch_loss: Vec::with_capacity(config.epochs_embedding),
        influence_epoch_loss: Vec::with_capacity(config.epochs_influence),
    };

    let mut grad = vec![vec![0.0_f64; config.static_dim]; n];
    for epoch in 0..config.epochs_embedding {
        let mut epoch_loss = 0.0;
        let mut sample = 0;
        for batch in plan.phase1.chunks(config.batch_size) {
            for g in grad.iter_mut() {
                g.fill(0.0);
            }
            for s in batch {
                let l = phase1_gradients(&space, s, &mut grad);
                if !l.is_finite() {
                    return Err(Error::NonFiniteLoss {
                        phase: "embedding",
                        epoch,
                        sample,
                        target: ids[s.target].clone(),
                    });
                }
                epoch_loss += l;
                sample += 1;
            }
            for (vector, g) in space.statics.iter_mut().zip(&grad) {
                for (x, d) in vector.iter_mut().zip(g) {
                    *x -= config.learning_rate * d;
                }
            }
        }
        trace.embedding_epoch_loss.push(epoch_loss);
    }

    let mut edge_grad = vec![0.0_f64; space.influences.len()];
    for epoch in 0..config.epochs_influence {
        let mut epoch_loss = 0.0;
        let mut sample = 0;
        for batch in plan.phase2.chunks(config.batch_size) {
            // Corruption value for this batch; updates below shift the mean,
            // the next batch picks the shift up.
            let mean = space.mean_influence().unwrap_or(0.0);
            edge_grad.fill(0.0);
            for s in batch {
                let l = phase2_gradients(&space, s, mean, &mut edge_grad);
                if !l.is_finite() {
                    return Err(Error::NonFiniteLoss {
                        phase: "influence",
                        epoch,
                        sample,
                        target: ids[s.target].clone(),
                    });
                }
                epoch_loss += l;
                sample += 1;
            }
            for (x, d) in space.influences.iter_mut().zip(&edge_grad) {
                *x -= config.learning_rate * d;
            }
        }
        trace.influence_epoch_loss.push(epoch_loss);
    }

    let mut edges = graph.edges.clone();
    for (edge, value) in edges.iter_mut().zip(&space.influences) {
        edge.influence = *value;
    }
    let model = EmbeddingModel {
        config: config.clone(),
        seed,
        window,
        statics: ids.iter().cloned().zip(space.statics).collect(),
        records: ids.iter().cloned().zip(slices).collect(),
        overalls: ids.iter().cloned().zip(overalls).collect(),
        influences: edges,
    };
    Ok(TrainOutput { model, trace })
}
