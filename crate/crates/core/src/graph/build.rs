//! Full graph construction pipeline.

use rayon::prelude::*;

use crate::data::EntitySet;
use crate::error::{Error, Result};
use crate::graph::{
    compute_self_weights, compute_weight, fit_influences, neighbors_within, BuildConfig,
    InfluenceEdge, Neighbor, RegressionNeighbor, Sstkg, WeightedPair,
};

/// Construction result plus human-readable warnings for the caller to print.
#[derive(Debug)]
pub struct BuildOutput {
    pub graph: Sstkg,
    pub warnings: Vec<String>,
}

struct TargetWeights {
    target: usize,
    /// Parallel to the target's neighborhood: (neighbor, weight).
    weighted: Vec<(Neighbor, f64)>,
}

/// Builds the influence graph: per-entity neighborhood filtering, spatial
/// weights, self-weights, influence regression, then pruning of negligible
/// edges. Output is invariant to input entity ordering and to `workers`.
pub fn build_graph(set: &EntitySet, config: &BuildConfig) -> Result<BuildOutput> {
    if set.is_empty() {
        return Err(Error::DegenerateGraph("empty entity set".into()));
    }
    config.validate(set.time_index().slot_count)?;

    let overalls = set.window_overalls(config.training_window);
    let mut warnings = Vec::new();

    // Entities with no records inside the training window cannot anchor
    // ratios; they stay out of the graph exactly like zero-record entities
    // stay out of ingestion.
    let excluded: Vec<usize> = (0..set.len()).filter(|&i| overalls[i] == 0.0).collect();
    if !excluded.is_empty() {
        let ids: Vec<&str> = excluded.iter().map(|&i| set.entity(i).id.as_str()).collect();
        warnings.push(format!(
            "excluded {} entities with zero records in the training window: {}",
            ids.len(),
            ids.join(", ")
        ));
    }
    let in_graph = |i: usize| overalls[i] > 0.0;

    let compute_target = |&target: &usize| -> Result<TargetWeights> {
        let neighborhood: Vec<Neighbor> =
            neighbors_within(set, target, config.distance_threshold_km)
                .into_iter()
                .filter(|n| in_graph(n.index))
                .collect();
        let distances: Vec<f64> = neighborhood.iter().map(|n| n.distance_km).collect();
        let mut weighted = Vec::with_capacity(neighborhood.len());
        for n in &neighborhood {
            let w = compute_weight(
                &set.entity(n.index).id,
                &set.entity(target).id,
                overalls[n.index],
                overalls[target],
                n.distance_km,
                &distances,
            )?;
            weighted.push((*n, w));
        }
        Ok(TargetWeights { target, weighted })
    };

    let targets: Vec<usize> = (0..set.len()).filter(|&i| in_graph(i)).collect();
    let per_target: Vec<TargetWeights> = run_maybe_parallel(config.workers, &targets, compute_target)?;

    // Flatten in deterministic (target, neighbor) order; the p denominator
    // sums every weighted pair in the whole graph.
    let mut pairs = Vec::new();
    for tw in &per_target {
        for (n, w) in &tw.weighted {
            if *w > 0.0 {
                pairs.push(WeightedPair {
                    source: n.index,
                    target: tw.target,
                    weight: *w,
                });
            }
        }
    }

    let window = config.training_window;
    let time_index = set.time_index();

    if pairs.is_empty() {
        warnings.push("no entity pairs within the distance threshold; graph has no edges".into());
        let self_weight = set
            .entities()
            .iter()
            .map(|e| (e.id.clone(), 0.0))
            .collect();
        return Ok(BuildOutput {
            graph: Sstkg {
                time_index,
                config: config.clone(),
                self_weight,
                edges: Vec::new(),
            },
            warnings,
        });
    }

    let p = compute_self_weights(set.len(), &pairs)?;

    let fit_target = |tw: &TargetWeights| -> Result<Vec<InfluenceEdge>> {
        let target = tw.target;
        let active: Vec<&(Neighbor, f64)> = tw.weighted.iter().filter(|(_, w)| *w > 0.0).collect();
        if active.is_empty() {
            return Ok(Vec::new());
        }
        let target_entity = set.entity(target);
        let columns: Vec<RegressionNeighbor<'_>> = active
            .iter()
            .map(|(n, w)| RegressionNeighbor {
                id: &set.entity(n.index).id,
                weight: *w,
                series: &set.entity(n.index).series,
            })
            .collect();
        let influences = fit_influences(
            &target_entity.id,
            &target_entity.series,
            p[target],
            &columns,
            window,
            config.ridge_lambda,
        )?;
        Ok(active
            .iter()
            .zip(&influences)
            .filter(|(_, i)| i.abs() >= config.prune_epsilon)
            .map(|((n, w), i)| InfluenceEdge {
                source: set.entity(n.index).id.clone(),
                target: target_entity.id.clone(),
                weight: *w,
                influence: *i,
                distance_km: n.distance_km,
            })
            .collect())
    };

    let with_weights: Vec<&TargetWeights> = per_target.iter().collect();
    let edge_groups: Vec<Vec<InfluenceEdge>> =
        run_maybe_parallel(config.workers, &with_weights, |tw| fit_target(tw))?;

    let mut edges: Vec<InfluenceEdge> = edge_groups.into_iter().flatten().collect();
    edges.sort_by(|a, b| (a.source.as_str(), a.target.as_str()).cmp(&(b.source.as_str(), b.target.as_str())));

    let self_weight = set
        .entities()
        .iter()
        .enumerate()
        .map(|(i, e)| (e.id.clone(), p[i]))
        .collect();

    Ok(BuildOutput {
        graph: Sstkg {
            time_index,
            config: config.clone(),
            self_weight,
            edges,
        },
        warnings,
    })
}

/// Maps `f` over `items`, in a scoped rayon pool when more than one worker is
/// requested. Results come back in input order either way, so the output is
/// byte-identical for every worker count.
fn run_maybe_parallel<T: Sync, R: Send>(
    workers: usize,
    items: &[T],
    f: impl Fn(&T) -> Result<R> + Sync,
) -> Result<Vec<R>> {
    if workers <= 1 {
        items.iter().map(&f).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("cannot build worker pool: {e}")))?;
        pool.install(|| items.par_iter().map(&f).collect())
    }
}
