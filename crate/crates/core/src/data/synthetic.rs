//! Synthetic-world generator with known influence structure.
//!
//! Entities fall into two roles. Base entities get independent sinusoid
//! series (random period and phase, uniform noise, clipped non-negative).
//! Derived entities sit within the distance threshold of their base sources
//! and their series is an exact linear combination of those sources, plus
//! optional Gaussian observation noise. Because the self-weights p are a
//! function of the finished series, the generator first fixes every series,
//! then computes p with the same weight code the builder uses, and finally
//! records ground-truth influences I* = p_target * J so the generative
//! identity p * R_target(t) = sum I* * R_source(t) holds exactly.
//!
//! A target is only kept when every one of its true influences clears
//! MIN_TRUE_INFLUENCE; the rest are demoted back to base entities. Without
//! the floor, targets in sparse corners of the box would carry influences
//! close to the default pruning threshold and recovery against them would
//! be meaningless.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{Entity, EntitySet, GeoPoint, SyntheticSpec, TimeIndex, TimeSeries};
use crate::error::{Error, Result};
use crate::graph::{
    compute_self_weights, compute_weight, haversine_km, WeightedPair, MIN_DISTANCE_KM,
};

/// One known influence edge of the generated world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthEdge {
    pub source: String,
    pub target: String,
    pub influence: f64,
}

/// What the generator knows and the builder is supposed to recover.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Self-weights over the full slot window, every entity.
    pub self_weights: BTreeMap<String, f64>,
    /// Influence edges sorted by (source, target); zero everywhere else.
    pub influences: Vec<GroundTruthEdge>,
    /// Entities whose series is generated from neighbors. Recovery claims
    /// apply to edges into these: a base entity's series is independent by
    /// construction, so no influence assignment onto it is "true".
    pub derived_targets: Vec<String>,
}

impl GroundTruth {
    pub fn influence(&self, source: &str, target: &str) -> f64 {
        self.influences
            .iter()
            .find(|e| e.source == source && e.target == target)
            .map(|e| e.influence)
            .unwrap_or(0.0)
    }
}

/// A generated dataset plus its ground truth.
#[derive(Debug)]
pub struct SyntheticWorld {
    pub entities: EntitySet,
    pub ground_truth: GroundTruth,
}

// Base-series envelope. The floor (level - amplitude - jitter) stays well
// above zero, so base series never clip and the margin checks during
// coefficient assignment keep noise-free derived series positive too.
const LEVEL: (f64, f64) = (60.0, 100.0);
const AMPLITUDE: (f64, f64) = (10.0, 25.0);
const PERIOD: (f64, f64) = (5.0, 14.0);
const JITTER: f64 = 5.0;
// Mixing coefficients before rescaling. Scaling a target's coefficients, by
// hand or via the overall anchor below, inflates its overall record, which
// shrinks its incoming weight ratios and with them every true influence
// p*J; the product barely moves with J, so the rescale is safe.
const POSITIVE_COEF: (f64, f64) = (1.0, 1.3);
const NEGATIVE_COEF: (f64, f64) = (0.45, 0.6);
// Probability that a source beyond the nearest attempts a negative sign.
const NEGATIVE_SHARE: f64 = 0.25;
// Pointwise lower bound noise-free derived series must keep (pre-rescale).
const SERIES_MARGIN: f64 = 5.0;
// A derived target's overall record is anchored to a uniform draw from this
// band around its nearest neighbor's overall, keeping it inside the scale
// range the rest of the world occupies.
const SCALE_BAND: (f64, f64) = (0.9, 1.1);
// Weakest true influence a target may carry before it is demoted.
const MIN_TRUE_INFLUENCE: f64 = 0.0105;

/// Generates `spec.entity_count` entities inside the bounding box together
/// with a sparse ground-truth influence structure confined to pairs within
/// `distance_threshold_km`. Deterministic in `spec.seed`; observation noise
/// is drawn last, so two specs differing only in `noise_sigma` share
/// locations, base series and coefficients.
pub fn generate_synthetic(
    spec: &SyntheticSpec,
    distance_threshold_km: f64,
) -> Result<SyntheticWorld> {
    spec.validate()?;
    if !distance_threshold_km.is_finite() || distance_threshold_km <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "distance threshold {distance_threshold_km} must be a positive finite real"
        )));
    }

    let n = spec.entity_count;
    let slots = spec.slot_count;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);

    let width = n.saturating_sub(1).to_string().len().max(4);
    let ids: Vec<String> = (0..n).map(|i| format!("e{i:0width$}")).collect();

    let bb = spec.bounding_box;
    let locations: Vec<GeoPoint> = (0..n)
        .map(|_| {
            let lat = rng.gen_range(bb.min.lat..=bb.max.lat);
            let lon = rng.gen_range(bb.min.lon..=bb.max.lon);
            GeoPoint::new(lat, lon).expect("sampled inside a validated box")
        })
        .collect();
    let categories: Vec<String> = (0..n)
        .map(|_| spec.category_pool[rng.gen_range(0..spec.category_pool.len())].clone())
        .collect();

    let base: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let level = rng.gen_range(LEVEL.0..LEVEL.1);
            let amplitude = rng.gen_range(AMPLITUDE.0..AMPLITUDE.1);
            let period = rng.gen_range(PERIOD.0..PERIOD.1);
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            (0..slots)
                .map(|t| {
                    let s = level
                        + amplitude * (std::f64::consts::TAU * t as f64 / period + phase).sin()
                        + rng.gen_range(-JITTER..JITTER);
                    s.max(0.0)
                })
                .collect()
        })
        .collect();

    // Floored within-threshold neighborhoods over locations alone, nearest
    // first. Same floor and threshold rule the graph builder applies later.
    let neighborhoods: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|i| {
            let mut nbrs: Vec<(usize, f64)> = (0..n)
                .filter(|&j| j != i)
                .filter_map(|j| {
                    let d = haversine_km(locations[i], locations[j]).max(MIN_DISTANCE_KM);
                    (d <= distance_threshold_km).then_some((j, d))
                })
                .collect();
            nbrs.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| ids[a.0].cmp(&ids[b.0])));
            nbrs
        })
        .collect();

    // Derived targets: a greedy independent set under the threshold, so every
    // derived entity's neighborhood consists purely of base entities and its
    // regression design stays full-rank. Visit order follows the incoming
    // log-distance mass; entities rich in it earn larger self-weights and
    // survive the influence floor below.
    let weight_score: Vec<f64> = (0..n)
        .map(|i| {
            let nbrs = &neighborhoods[i];
            if nbrs.is_empty() {
                return 0.0;
            }
            let mean_d: f64 = nbrs.iter().map(|&(_, d)| d).sum::<f64>() / nbrs.len() as f64;
            nbrs.iter().map(|&(_, d)| (1.0 + mean_d / d).ln()).sum()
        })
        .collect();
    let mut visit: Vec<usize> = (0..n).collect();
    visit.sort_by(|&a, &b| weight_score[b].total_cmp(&weight_score[a]).then(a.cmp(&b)));
    let mut derived = BTreeSet::new();
    for &i in &visit {
        if neighborhoods[i].is_empty() {
            continue;
        }
        if neighborhoods[i].iter().any(|(j, _)| derived.contains(j)) {
            continue;
        }
        derived.insert(i);
    }

    // Influence coefficients J per derived target, walked nearest first.
    // Each eligible neighbor carries influence with probability
    // influence_density; if none is drawn the nearest neighbor is forced so
    // a derived target never ends up sourceless. The nearest source is
    // always positive; later ones may flip negative when the actual mix
    // stays above the margin at every slot. The finished mix is rescaled so
    // the target's overall record lands beside its nearest neighbor's:
    // overall ratios drive the weights and the negative-sampling bands, and
    // a scale outlier would be left without sampling companions. Rescaling
    // barely moves the true influences, exactly like the coefficient
    // magnitudes themselves (see the constants above).
    let mut coefficients: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
    for &i in derived.iter() {
        let eligible = &neighborhoods[i];
        let mut selected: Vec<usize> = eligible
            .iter()
            .filter_map(|&(j, _)| rng.gen_bool(spec.influence_density).then_some(j))
            .collect();
        if selected.is_empty() {
            selected.push(eligible[0].0);
        }

        let mut coefs: Vec<(usize, f64)> = Vec::with_capacity(selected.len());
        let mut mix = vec![0.0_f64; slots];
        for (rank, &j) in selected.iter().enumerate() {
            if rank > 0 && rng.gen_bool(NEGATIVE_SHARE) {
                let magnitude = rng.gen_range(NEGATIVE_COEF.0..NEGATIVE_COEF.1);
                let fits = mix
                    .iter()
                    .zip(&base[j])
                    .all(|(m, s)| m - magnitude * s >= SERIES_MARGIN);
                if fits {
                    coefs.push((j, -magnitude));
                    for (m, s) in mix.iter_mut().zip(&base[j]) {
                        *m -= magnitude * s;
                    }
                    continue;
                }
            }
            let c = rng.gen_range(POSITIVE_COEF.0..POSITIVE_COEF.1);
            coefs.push((j, c));
            for (m, s) in mix.iter_mut().zip(&base[j]) {
                *m += c * s;
            }
        }
        let anchor_overall: f64 = base[eligible[0].0].iter().sum();
        let mix_overall: f64 = mix.iter().sum();
        let gamma = rng.gen_range(SCALE_BAND.0..SCALE_BAND.1) * anchor_overall / mix_overall;
        for (_, c) in coefs.iter_mut() {
            *c *= gamma;
        }
        coefs.sort_by_key(|&(j, _)| j);
        coefficients.insert(i, coefs);
    }

    let assemble = |coefficients: &BTreeMap<usize, Vec<(usize, f64)>>| -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| match coefficients.get(&i) {
                Some(coefs) => (0..slots)
                    .map(|t| coefs.iter().map(|&(j, c)| c * base[j][t]).sum::<f64>())
                    .collect(),
                None => base[i].clone(),
            })
            .collect()
    };
    let self_weights_of = |series: &[Vec<f64>]| -> Result<Vec<f64>> {
        let overalls: Vec<f64> = series.iter().map(|row| row.iter().sum()).collect();
        let mut pairs: Vec<WeightedPair> = Vec::new();
        for target in 0..n {
            if overalls[target] <= 0.0 {
                continue;
            }
            let nbrs = &neighborhoods[target];
            let dists: Vec<f64> = nbrs.iter().map(|&(_, d)| d).collect();
            for &(source, d) in nbrs.iter() {
                let w = compute_weight(
                    &ids[source],
                    &ids[target],
                    overalls[source],
                    overalls[target],
                    d,
                    &dists,
                )?;
                pairs.push(WeightedPair {
                    source,
                    target,
                    weight: w,
                });
            }
        }
        if pairs.is_empty() {
            Ok(vec![0.0; n])
        } else {
            compute_self_weights(n, &pairs)
        }
    };

    // Demotion loop: measure every target's weakest true influence |p*J|
    // against the floor and demote the worst offender back to a base entity,
    // one per round. A demoted entity was never a source (sources are within
    // threshold of their target, demoted entities were derived and the
    // derived set is independent), so other targets' series never change;
    // the weight mass does, hence the re-measuring. Demotion uses noise-free
    // series only, keeping topology invariant across noise_sigma.
    let mut series: Vec<Vec<f64>>;
    loop {
        series = assemble(&coefficients);
        let p = self_weights_of(&series)?;
        let worst = coefficients
            .iter()
            .filter_map(|(&i, coefs)| {
                let weakest = coefs
                    .iter()
                    .map(|&(_, c)| (p[i] * c).abs())
                    .fold(f64::INFINITY, f64::min);
                (weakest < MIN_TRUE_INFLUENCE).then_some((weakest, i))
            })
            .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        match worst {
            Some((_, i)) => {
                coefficients.remove(&i);
                derived.remove(&i);
            }
            None => break,
        }
    }
    // Observation noise lands on derived rows only, clipped at zero; base
    // series stay identical across noise_sigma variants.
    if spec.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, spec.noise_sigma)
            .map_err(|e| Error::InvalidConfig(format!("noise_sigma: {e}")))?;
        for &i in coefficients.keys() {
            for v in series[i].iter_mut() {
                *v = (*v + normal.sample(&mut rng)).max(0.0);
            }
        }
    }

    let time_index = TimeIndex::new(0, 86_400, slots)?;
    let entities: Vec<Entity> = (0..n)
        .map(|i| {
            Ok(Entity {
                id: ids[i].clone(),
                location: locations[i],
                category: categories[i].clone(),
                overall_record: series[i].iter().sum(),
                series: TimeSeries::from_values(series[i].clone())?,
            })
        })
        .collect::<Result<_>>()?;
    let entities = EntitySet::new(entities, time_index)?;

    // Self-weights of the finished, possibly noisy world via the same weight
    // code the builder uses. The ids are generated pre-sorted, so EntitySet
    // indices match ours.
    let p = self_weights_of(&series)?;

    let mut influences: Vec<GroundTruthEdge> = Vec::new();
    for (&target, coefs) in &coefficients {
        for &(source, c) in coefs {
            influences.push(GroundTruthEdge {
                source: ids[source].clone(),
                target: ids[target].clone(),
                influence: p[target] * c,
            });
        }
    }
    influences.sort_by(|a, b| (&a.source, &a.target).cmp(&(&b.source, &b.target)));

    let ground_truth = GroundTruth {
        self_weights: ids
            .iter()
            .cloned()
            .zip(p.iter().copied())
            .collect(),
        influences,
        derived_targets: derived.iter().map(|&i| ids[i].clone()).collect(),
    };

    Ok(SyntheticWorld {
        entities,
        ground_truth,
    })
}
