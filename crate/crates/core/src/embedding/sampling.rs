//! Fixed corruption plans for both training phases.
//!
//! All randomness is spent once, up front: the plan fixes sample order and
//! every entity-swap negative before the first epoch, and each epoch replays
//! it unchanged. Epoch losses are therefore values of one fixed objective
//! and can be compared across epochs.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha20Rng;

use super::loss::{Phase1Sample, Phase2Sample};
use super::space::{EntitySwap, TrainSpace};
use super::EmbeddingConfig;
use crate::error::{Error, Result};

/// Sample order and negatives for both phases.
#[derive(Debug, Clone)]
pub struct TrainPlan {
    pub phase1: Vec<Phase1Sample>,
    pub phase2: Vec<Phase2Sample>,
}

/// Entities eligible as replacements for `neighbor` in a corruption of
/// `target`'s neighborhood: anything with no edge to or from the target in
/// either direction (a corruption must be false) whose overall record lies
/// within `band` relative distance of the neighbor's. Ascending
/// (overall, index) order.
fn negative_pool(
    space: &TrainSpace,
    overalls: &[f64],
    target: usize,
    neighbor: usize,
    band: f64,
) -> Vec<usize> {
    let sources: Vec<usize> = space.in_edges[target].iter().map(|e| e.source).collect();
    let tolerance = band * overalls[neighbor];
    let mut pool: Vec<usize> = (0..space.entity_count())
        .filter(|&m| m != target && m != neighbor && !sources.contains(&m))
        .filter(|&m| !space.in_edges[m].iter().any(|e| e.source == target))
        .filter(|&m| (overalls[m] - overalls[neighbor]).abs() <= tolerance)
        .collect();
    pool.sort_by(|&a, &b| overalls[a].total_cmp(&overalls[b]).then(a.cmp(&b)));
    pool
}

/// Builds the corruption plan. Targets without incoming edges are skipped in
/// both phases; a neighbor with no similarly-sized replacement even after
/// one doubling of the band is an error, named so the caller can report it.
pub fn build_plan(
    space: &TrainSpace,
    overalls: &[f64],
    ids: &[String],
    config: &EmbeddingConfig,
    rng: &mut ChaCha20Rng,
) -> Result<TrainPlan> {
    let mut targets: Vec<usize> = (0..space.entity_count())
        .filter(|&t| !space.in_edges[t].is_empty())
        .collect();
    targets.shuffle(rng);

    // A phase that never runs draws no negatives; a pool failure should not
    // abort a run that only trains influences.
    let phase1_negatives = if config.epochs_embedding == 0 {
        0
    } else {
        config.negatives_per_sample
    };
    let mut phase1 = Vec::with_capacity(targets.len());
    for &target in &targets {
        let q = space.in_edges[target].len();
        let mut negatives = Vec::with_capacity(phase1_negatives);
        for _ in 0..phase1_negatives {
            let position = rng.gen_range(0..q);
            let neighbor = space.in_edges[target][position].source;
            let mut pool = negative_pool(space, overalls, target, neighbor, config.similarity_band);
            if pool.is_empty() {
                pool = negative_pool(
                    space,
                    overalls,
                    target,
                    neighbor,
                    2.0 * config.similarity_band,
                );
            }
            if pool.is_empty() {
                return Err(Error::NoNegativeCandidates {
                    neighbor: ids[neighbor].clone(),
                });
            }
            let replacement = pool[rng.gen_range(0..pool.len())];
            negatives.push(EntitySwap {
                position,
                replacement,
            });
        }
        phase1.push(Phase1Sample { target, negatives });
    }

    let mut order2 = targets;
    order2.shuffle(rng);
    let phase2 = order2
        .into_iter()
        .map(|target| Phase2Sample { target })
        .collect();

    Ok(TrainPlan { phase1, phase2 })
}

#[cfg(test)]
mod tests {
    use super::super::space::InRef;
    use super::*;
    use rand::SeedableRng;

    fn space_with_overalls(n: usize, edges: &[(usize, usize)]) -> TrainSpace {
        let mut in_edges = vec![Vec::new(); n];
        for (k, &(source, target)) in edges.iter().enumerate() {
            in_edges[target].push(InRef { source, edge: k });
        }
        TrainSpace {
            statics: vec![vec![0.0; 2]; n],
            records: vec![vec![0.0; 3]; n],
            p: vec![1.0 / n as f64; n],
            influences: vec![0.05; edges.len()],
            in_edges,
        }
    }

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("e{i}")).collect()
    }

    #[test]
    fn pool_excludes_target_sources_and_respects_band() {
        let space = space_with_overalls(6, &[(1, 0), (2, 0)]);
        // Neighbor 1 has overall 100; band 0.2 admits [80, 120].
        let overalls = [50.0, 100.0, 110.0, 95.0, 121.0, 80.0];
        let pool = negative_pool(&space, &overalls, 0, 1, 0.2);
        // 0 is the target, 1 the neighbor, 2 a source, 4 outside the band.
        assert_eq!(pool, vec![5, 3]);
    }

    #[test]
    fn band_doubles_once_before_giving_up() {
        let space = space_with_overalls(3, &[(1, 0)]);
        let cfg = EmbeddingConfig {
            negatives_per_sample: 1,
            similarity_band: 0.05,
            ..EmbeddingConfig::default()
        };
        // Entity 2 sits outside the 5% band of neighbor 1 but inside 10%.
        let overalls = [100.0, 100.0, 92.0];
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let plan = build_plan(&space, &overalls, &ids(3), &cfg, &mut rng).unwrap();
        assert_eq!(plan.phase1[0].negatives[0].replacement, 2);
    }

    #[test]
    fn exhausted_pool_is_an_error_naming_the_neighbor() {
        let space = space_with_overalls(2, &[(1, 0)]);
        let overalls = [100.0, 100.0];
        let cfg = EmbeddingConfig { negatives_per_sample: 2, ..EmbeddingConfig::default() };
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        match build_plan(&space, &overalls, &ids(2), &cfg, &mut rng) {
            Err(Error::NoNegativeCandidates { neighbor }) => assert_eq!(neighbor, "e1"),
            other => panic!("expected NoNegativeCandidates, got {other:?}"),
        }
    }

    #[test]
    fn plan_is_deterministic_in_the_rng_seed() {
        let space = space_with_overalls(8, &[(1, 0), (2, 0), (3, 2), (5, 4)]);
        let overalls = [90.0, 100.0, 95.0, 105.0, 98.0, 102.0, 97.0, 103.0];
        let cfg = EmbeddingConfig::default();
        let plan_a =
            build_plan(&space, &overalls, &ids(8), &cfg, &mut ChaCha20Rng::seed_from_u64(9))
                .unwrap();
        let plan_b =
            build_plan(&space, &overalls, &ids(8), &cfg, &mut ChaCha20Rng::seed_from_u64(9))
                .unwrap();
        assert_eq!(plan_a.phase1, plan_b.phase1);
        assert_eq!(plan_a.phase2, plan_b.phase2);
    }

    #[test]
    fn zero_negatives_is_allowed() {
        let space = space_with_overalls(2, &[(1, 0)]);
        let overalls = [100.0, 100.0];
        let cfg = EmbeddingConfig { negatives_per_sample: 0, ..EmbeddingConfig::default() };
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let plan = build_plan(&space, &overalls, &ids(2), &cfg, &mut rng).unwrap();
        assert_eq!(plan.phase1.len(), 1);
        assert!(plan.phase1[0].negatives.is_empty());
    }
}
