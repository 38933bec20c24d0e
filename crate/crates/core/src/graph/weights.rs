//! Spatial edge weights and self-weights.

use crate::error::{Error, Result};

/// Weight of the edge `source -> target`.
///
/// With `n` entities in the target's neighborhood at distances `d_j`, the
/// weight is
///
/// ```text
/// W = (overall_source / overall_target) * ln(1 + sum_j(d_j) / (n * d_source))
/// ```
///
/// A source with zero overall record yields weight 0 so the edge drops out
/// before regression. The target overall must be positive: ingestion and the
/// build layer exclude zero-record entities before this point.
pub fn compute_weight(
    source_id: &str,
    target_id: &str,
    source_overall: f64,
    target_overall: f64,
    distance_km: f64,
    neighbor_distances: &[f64],
) -> Result<f64> {
    if source_overall == 0.0 {
        return Ok(0.0);
    }
    if target_overall <= 0.0 {
        return Err(Error::DegenerateGraph(format!(
            "target {target_id:?} has zero overall record"
        )));
    }
    if distance_km <= 0.0 {
        return Err(Error::CoLocated {
            a: source_id.to_string(),
            b: target_id.to_string(),
        });
    }
    let n = neighbor_distances.len();
    debug_assert!(n >= 1, "neighborhood must contain the source itself");
    let sum: f64 = neighbor_distances.iter().sum();
    Ok((source_overall / target_overall) * (sum / (n as f64 * distance_km)).ln_1p())
}

/// A weighted directed pair used while assembling the graph.
#[derive(Debug, Clone, Copy)]
pub struct WeightedPair {
    pub source: usize,
    pub target: usize,
    pub weight: f64,
}

/// Self-weights: p(e) = (sum of weights into e) / (sum of all weights).
/// The denominator runs over every weighted pair in the whole graph, so the
/// p values always sum to 1. Entities without incoming weight get p = 0 and
/// count as isolated.
pub fn compute_self_weights(entity_count: usize, weights: &[WeightedPair]) -> Result<Vec<f64>> {
    let mut incoming = vec![0.0_f64; entity_count];
    let mut total = 0.0_f64;
    for w in weights {
        incoming[w.target] += w.weight;
        total += w.weight;
    }
    if total <= 0.0 {
        return Err(Error::DegenerateGraph("zero total weight".into()));
    }
    Ok(incoming.into_iter().map(|x| x / total).collect())
}
