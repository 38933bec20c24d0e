//! Flat numeric state shared by both training phases.
//!
//! The trainer lowers entities and edges into index-addressed vectors so the
//! loss and gradient code never touches ids or maps. Tests build a
//! `TrainSpace` directly to probe the math on small configurations.

/// One incoming edge reference: the source entity and the flat edge slot
/// holding its influence value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InRef {
    pub source: usize,
    pub edge: usize,
}

/// Trainable state plus frozen context for one graph.
///
/// `statics` move in the embedding phase, `influences` in the influence
/// phase; `records` and `p` never move. `in_edges[t]` lists the incoming
/// edges of entity `t` in ascending source order, which fixes every
/// accumulation order in the loss code.
#[derive(Debug, Clone)]
pub struct TrainSpace {
    pub statics: Vec<Vec<f64>>,
    pub records: Vec<Vec<f64>>,
    pub p: Vec<f64>,
    pub influences: Vec<f64>,
    pub in_edges: Vec<Vec<InRef>>,
}

impl TrainSpace {
    pub fn entity_count(&self) -> usize {
        self.statics.len()
    }

    pub fn static_dim(&self) -> usize {
        self.statics.first().map_or(0, Vec::len)
    }

    pub fn record_dim(&self) -> usize {
        self.records.first().map_or(0, Vec::len)
    }

    /// Mean influence over every edge of the graph; this is the corruption
    /// value of the influence phase. Zero-edge spaces have no mean.
    pub fn mean_influence(&self) -> Option<f64> {
        if self.influences.is_empty() {
            None
        } else {
            Some(self.influences.iter().sum::<f64>() / self.influences.len() as f64)
        }
    }

    fn debug_validate(&self) {
        debug_assert_eq!(self.records.len(), self.statics.len());
        debug_assert_eq!(self.p.len(), self.statics.len());
        debug_assert_eq!(self.in_edges.len(), self.statics.len());
    }
}

/// An entity swap applied to one incoming position while scoring a corrupted
/// neighborhood: the static and record contributions of the original source
/// are replaced by `replacement`'s, the influence value stays.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EntitySwap {
    /// Position into `in_edges[target]`.
    pub position: usize,
    pub replacement: usize,
}

/// Embedding-phase score: squared distance between the self-weighted outward
/// embedding of `target` and the aggregate of its incoming neighborhood,
/// statics unscaled and records scaled by influence. `swap` scores the
/// corrupted variant.
pub fn score_static_phase(space: &TrainSpace, target: usize, swap: Option<EntitySwap>) -> f64 {
    space.debug_validate();
    let edges = &space.in_edges[target];
    let p = space.p[target];
    let mut f = 0.0_f64;
    for d in 0..space.static_dim() {
        let mut r = p * space.statics[target][d];
        for (pos, e) in edges.iter().enumerate() {
            let source = swapped_source(e.source, pos, swap);
            r -= space.statics[source][d];
        }
        f += r * r;
    }
    for k in 0..space.record_dim() {
        let mut r = p * space.records[target][k];
        for (pos, e) in edges.iter().enumerate() {
            let source = swapped_source(e.source, pos, swap);
            r -= space.influences[e.edge] * space.records[source][k];
        }
        f += r * r;
    }
    f
}

fn swapped_source(source: usize, position: usize, swap: Option<EntitySwap>) -> usize {
    match swap {
        Some(s) if s.position == position => s.replacement,
        _ => source,
    }
}

/// An influence override applied to one incoming position while scoring the
/// influence phase; the corruption replaces the edge's influence with the
/// graph mean.
#[derive(Debug, Clone, Copy)]
pub struct InfluenceSwap {
    /// Position into `in_edges[target]`.
    pub position: usize,
    pub influence: f64,
}

/// Influence-phase score: squared distance between the self-weighted outward
/// embedding of `target` and the influence-weighted sum of its incoming
/// neighbors' full outward embeddings (static and record halves alike).
pub fn score_influence_phase(
    space: &TrainSpace,
    target: usize,
    swap: Option<InfluenceSwap>,
) -> f64 {
    space.debug_validate();
    let edges = &space.in_edges[target];
    let p = space.p[target];
    let s_dim = space.static_dim();
    let mut f = 0.0_f64;
    for d in 0..s_dim + space.record_dim() {
        let own = if d < s_dim {
            space.statics[target][d]
        } else {
            space.records[target][d - s_dim]
        };
        let mut r = p * own;
        for (pos, e) in edges.iter().enumerate() {
            let influence = match swap {
                Some(s) if s.position == pos => s.influence,
                _ => space.influences[e.edge],
            };
            let comp = if d < s_dim {
                space.statics[e.source][d]
            } else {
                space.records[e.source][d - s_dim]
            };
            r -= influence * comp;
        }
        f += r * r;
    }
    f
}

#[cfg(test)]
pub(crate) fn toy_space() -> TrainSpace {
    // Entity 0 has neighbors 1 and 2; entity 3 floats free as swap material.
    TrainSpace {
        statics: vec![
            vec![0.5, -1.0],
            vec![1.5, 2.0],
            vec![-0.5, 1.0],
            vec![2.0, 0.5],
        ],
        records: vec![
            vec![0.2, 0.4, 0.1],
            vec![0.6, 0.3, 0.9],
            vec![0.8, 0.1, 0.5],
            vec![0.4, 0.7, 0.2],
        ],
        p: vec![0.3, 0.2, 0.25, 0.25],
        influences: vec![0.04, -0.02],
        in_edges: vec![
            vec![InRef { source: 1, edge: 0 }, InRef { source: 2, edge: 1 }],
            vec![],
            vec![],
            vec![],
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_static(space: &TrainSpace, target: usize, swap: Option<EntitySwap>) -> f64 {
        let edges = &space.in_edges[target];
        let source_at = |pos: usize| match swap {
            Some(s) if s.position == pos => s.replacement,
            _ => edges[pos].source,
        };
        let s_dim = space.static_dim();
        let w = space.record_dim();
        let mut out: Vec<f64> = space.statics[target]
            .iter()
            .chain(&space.records[target])
            .map(|v| v * space.p[target])
            .collect();
        for (pos, e) in edges.iter().enumerate() {
            let src = source_at(pos);
            for (d, o) in out.iter_mut().take(s_dim).enumerate() {
                *o -= space.statics[src][d];
            }
            for (k, o) in out.iter_mut().skip(s_dim).take(w).enumerate() {
                *o -= space.influences[e.edge] * space.records[src][k];
            }
        }
        out.iter().map(|r| r * r).sum()
    }

    #[test]
    fn static_score_matches_vector_form() {
        let space = toy_space();
        let plain = score_static_phase(&space, 0, None);
        assert!((plain - brute_static(&space, 0, None)).abs() < 1e-12);
        let swap = EntitySwap { position: 1, replacement: 3 };
        let swapped = score_static_phase(&space, 0, Some(swap));
        assert!((swapped - brute_static(&space, 0, Some(swap))).abs() < 1e-12);
        assert_ne!(plain, swapped);
    }

    #[test]
    fn swapping_with_identical_entity_is_a_noop() {
        let mut space = toy_space();
        space.statics[3] = space.statics[2].clone();
        space.records[3] = space.records[2].clone();
        let swap = EntitySwap { position: 1, replacement: 3 };
        let plain = score_static_phase(&space, 0, None);
        let swapped = score_static_phase(&space, 0, Some(swap));
        assert_eq!(plain, swapped);
    }

    #[test]
    fn influence_score_reaches_zero_on_exact_reconstruction() {
        // Single neighbor whose scaled embedding matches the target exactly.
        let statics = vec![vec![2.0, 4.0], vec![10.0, 20.0]];
        let records = vec![vec![1.0], vec![5.0]];
        let space = TrainSpace {
            statics,
            records,
            p: vec![0.5, 0.5],
            influences: vec![0.1],
            in_edges: vec![vec![InRef { source: 1, edge: 0 }], vec![]],
        };
        // p*out_0 = [1, 2, 0.5]; I*out_1 = [1, 2, 0.5].
        let f = score_influence_phase(&space, 0, None);
        assert!(f.abs() < 1e-12, "{f}");
        let corrupted = score_influence_phase(
            &space,
            0,
            Some(InfluenceSwap { position: 0, influence: 0.2 }),
        );
        assert!(corrupted > 0.0);
    }

    #[test]
    fn empty_neighborhood_scores_pure_self_norm() {
        let space = toy_space();
        let f = score_static_phase(&space, 1, None);
        let expected: f64 = space.statics[1]
            .iter()
            .chain(&space.records[1])
            .map(|v| (space.p[1] * v).powi(2))
            .sum();
        assert!((f - expected).abs() < 1e-12);
        let g = score_influence_phase(&space, 1, None);
        assert!((g - expected).abs() < 1e-12);
    }
}
