//! Ranking losses and analytic gradients for the two training phases.
//!
//! Both phases minimize the negative log-sigmoid margin between corrupted
//! and observed neighborhood scores, summed over every negative of every
//! sample. An equal pair of scores contributes exactly ln 2, which gives the
//! untrained-loss reference point k * batch * ln 2 used by the training
//! sanity checks.

use super::space::{
    score_influence_phase, score_static_phase, EntitySwap, InfluenceSwap, TrainSpace,
};

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^x) without overflow on either tail.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// One embedding-phase sample: a target plus entity-swap negatives. Each
/// negative names the corrupted incoming position and the replacement
/// entity; the edge influence stays with the position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Phase1Sample {
    pub target: usize,
    pub negatives: Vec<EntitySwap>,
}

/// Loss of one embedding-phase sample.
pub fn phase1_loss(space: &TrainSpace, sample: &Phase1Sample) -> f64 {
    let f_pos = score_static_phase(space, sample.target, None);
    sample
        .negatives
        .iter()
        .map(|&swap| {
            let f_neg = score_static_phase(space, sample.target, Some(swap));
            softplus(f_pos - f_neg)
        })
        .sum()
}

/// Adds the gradient of [`phase1_loss`] with respect to every static vector
/// into `grad` (shaped like `space.statics`) and returns the loss. Record
/// slices, self-weights and influences are constants here.
pub fn phase1_gradients(
    space: &TrainSpace,
    sample: &Phase1Sample,
    grad: &mut [Vec<f64>],
) -> f64 {
    let x = sample.target;
    let edges = &space.in_edges[x];
    let p = space.p[x];
    let s_dim = space.static_dim();

    // Static part of the observed residual p*out_x - in_x.
    let mut r_s = vec![0.0_f64; s_dim];
    for (d, r) in r_s.iter_mut().enumerate() {
        *r = p * space.statics[x][d];
        for e in edges {
            *r -= space.statics[e.source][d];
        }
    }

    let f_pos = score_static_phase(space, x, None);
    let mut loss = 0.0_f64;
    for &swap in &sample.negatives {
        let f_neg = score_static_phase(space, x, Some(swap));
        loss += softplus(f_pos - f_neg);
        // d(loss)/d(delta) with delta = f_neg - f_pos.
        let g = sigmoid(f_neg - f_pos) - 1.0;

        let replaced = edges[swap.position].source;
        let m = swap.replacement;
        for d in 0..s_dim {
            // Corruption shifts the static residual by exactly this much.
            let shift = space.statics[replaced][d] - space.statics[m][d];
            grad[x][d] += g * 2.0 * p * shift;
            for (pos, e) in edges.iter().enumerate() {
                if pos == swap.position {
                    continue;
                }
                grad[e.source][d] += g * -2.0 * shift;
            }
            grad[replaced][d] += g * 2.0 * r_s[d];
            grad[m][d] += g * -2.0 * (r_s[d] + shift);
        }
    }
    loss
}

/// One influence-phase sample. Negatives are implicit: every incoming
/// position is corrupted once by resetting its influence to the graph mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Phase2Sample {
    pub target: usize,
}

/// Loss of one influence-phase sample. `mean_influence` is the corruption
/// value, held constant for the whole batch by the caller so the gradient
/// below stays exact.
pub fn phase2_loss(space: &TrainSpace, sample: &Phase2Sample, mean_influence: f64) -> f64 {
    let f_pos = score_influence_phase(space, sample.target, None);
    (0..space.in_edges[sample.target].len())
        .map(|position| {
            let swap = InfluenceSwap {
                position,
                influence: mean_influence,
            };
            let f_neg = score_influence_phase(space, sample.target, Some(swap));
            softplus(f_pos - f_neg)
        })
        .sum()
}

/// Adds the gradient of [`phase2_loss`] with respect to every influence
/// value into `grad` (indexed like `space.influences`) and returns the loss.
/// Statics, records and `mean_influence` are constants here.
pub fn phase2_gradients(
    space: &TrainSpace,
    sample: &Phase2Sample,
    mean_influence: f64,
    grad: &mut [f64],
) -> f64 {
    let x = sample.target;
    let edges = &space.in_edges[x];
    let p = space.p[x];
    let s_dim = space.static_dim();
    let dim = s_dim + space.record_dim();

    let out = |entity: usize, d: usize| -> f64 {
        if d < s_dim {
            space.statics[entity][d]
        } else {
            space.records[entity][d - s_dim]
        }
    };

    // Observed residual r = p*out_x - sum_j I_j out_j.
    let mut r = vec![0.0_f64; dim];
    for (d, v) in r.iter_mut().enumerate() {
        *v = p * out(x, d);
        for e in edges {
            *v -= space.influences[e.edge] * out(e.source, d);
        }
    }
    let dot_out = |a: usize, b: usize| -> f64 {
        (0..dim).map(|d| out(a, d) * out(b, d)).sum()
    };
    let dot_r_out = |a: usize| -> f64 { (0..dim).map(|d| r[d] * out(a, d)).sum() };

    let f_pos = score_influence_phase(space, x, None);
    let mut loss = 0.0_f64;
    for (i, corrupted) in edges.iter().enumerate() {
        let swap = InfluenceSwap {
            position: i,
            influence: mean_influence,
        };
        let f_neg = score_influence_phase(space, x, Some(swap));
        loss += softplus(f_pos - f_neg);
        let g = sigmoid(f_neg - f_pos) - 1.0;

        // Corruption shifts the residual by (I_i - mean) * out_source_i.
        let shift = space.influences[corrupted.edge] - mean_influence;
        for (j, e) in edges.iter().enumerate() {
            if j == i {
                grad[e.edge] += g * 2.0 * dot_r_out(corrupted.source);
            } else {
                grad[e.edge] += g * -2.0 * shift * dot_out(corrupted.source, e.source);
            }
        }
    }
    loss
}
