//! Entity embeddings over the influence graph and their two-phase training.
//!
//! Every entity gets an outward embedding: a trainable static slice
//! initialized from its category direction scaled by log overall volume,
//! concatenated with a frozen record slice holding the log-scaled recent
//! series. Training first moves static slices against entity-swap negatives,
//! then moves edge influences against graph-mean corruptions; see [`train`].

mod loss;
mod sampling;
mod space;
mod train;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{SlotRange, TimeSeries};
use crate::error::{Error, Result};
use crate::graph::InfluenceEdge;
use crate::hash::fnv1a64;

pub use loss::{
    phase1_gradients, phase1_loss, phase2_gradients, phase2_loss, sigmoid, Phase1Sample,
    Phase2Sample,
};
pub use sampling::{build_plan, TrainPlan};
pub use space::{
    score_influence_phase, score_static_phase, EntitySwap, InRef, InfluenceSwap, TrainSpace,
};
pub use train::{train, TrainOutput, TrainingTrace};

/// Hyperparameters of embedding construction and training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmbeddingConfig {
    /// Width of the trainable static slice.
    pub static_dim: usize,
    /// Number of trailing window slots frozen into the record slice.
    pub record_window: usize,
    pub learning_rate: f64,
    /// Epochs of the static-slice phase.
    pub epochs_embedding: usize,
    /// Epochs of the influence phase.
    pub epochs_influence: usize,
    pub batch_size: usize,
    /// Entity-swap negatives per sample in the static-slice phase.
    pub negatives_per_sample: usize,
    /// Relative overall-record distance within which an entity can stand in
    /// for a corrupted neighbor.
    pub similarity_band: f64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            static_dim: 16,
            record_window: 7,
            learning_rate: 0.01,
            epochs_embedding: 50,
            epochs_influence: 50,
            batch_size: 64,
            negatives_per_sample: 4,
            similarity_band: 0.2,
        }
    }
}

impl EmbeddingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.static_dim == 0 {
            return Err(Error::InvalidConfig("static_dim must be positive".into()));
        }
        if self.record_window == 0 {
            return Err(Error::InvalidConfig("record_window must be positive".into()));
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "learning_rate {} must be a positive finite real",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be positive".into()));
        }
        if !self.similarity_band.is_finite() || self.similarity_band < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "similarity_band {} must be a non-negative finite real",
                self.similarity_band
            )));
        }
        Ok(())
    }
}

/// Log scaling applied to record values before they enter an embedding.
pub fn phi(x: f64) -> f64 {
    x.ln_1p()
}

/// Unit direction shared by every entity of a category. The direction is a
/// pure function of (category, dim, seed), so equal categories embed equal
/// directions and reruns reproduce them bit for bit.
pub fn category_vector(category: &str, dim: usize, seed: u64) -> Vec<f64> {
    let stream = fnv1a64(category.as_bytes()) ^ seed.wrapping_mul(0x9E3779B97F4A7C15);
    let mut rng = ChaCha20Rng::seed_from_u64(stream);
    let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        v[0] = 1.0;
        return v;
    }
    for x in v.iter_mut() {
        *x /= norm;
    }
    v
}

/// Frozen record slice of one entity: the last `window_len` slots of the
/// build window, each present value stored as phi(value) / phi(overall).
/// Slots before the window start or absent in the series stay at zero and
/// are flagged absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordSlice {
    pub entries: Vec<f64>,
    pub present: Vec<bool>,
}

impl RecordSlice {
    /// Builds the slice for `series` over the trailing `window_len` slots of
    /// `window`, normalizing by the window-scoped `overall`. A zero overall
    /// leaves every entry absent: the normalization is undefined and such
    /// entities carry no graph edges anyway.
    pub fn build(series: &TimeSeries, window: SlotRange, window_len: usize, overall: f64) -> Self {
        let mut entries = vec![0.0; window_len];
        let mut present = vec![false; window_len];
        let denom = phi(overall);
        if denom <= 0.0 {
            return Self { entries, present };
        }
        for k in 0..window_len {
            let offset = window_len - 1 - k;
            if offset >= window.end {
                continue;
            }
            let slot = window.end - 1 - offset;
            if slot < window.start {
                continue;
            }
            if let Some(v) = series.get(slot) {
                entries[k] = phi(v) / denom;
                present[k] = true;
            }
        }
        Self { entries, present }
    }

    /// Slot covered by entry `k` for a slice anchored at `window.end`.
    pub fn slot_of(window: SlotRange, window_len: usize, k: usize) -> Option<usize> {
        let offset = window_len.checked_sub(1 + k)?;
        let slot = window.end.checked_sub(1 + offset)?;
        (slot >= window.start).then_some(slot)
    }

    /// Entry index covering `slot`, if the slice reaches it.
    pub fn index_of(window: SlotRange, window_len: usize, slot: usize) -> Option<usize> {
        if slot >= window.end || slot < window.start {
            return None;
        }
        let offset = window.end - 1 - slot;
        (offset < window_len).then(|| window_len - 1 - offset)
    }

    /// Decodes entry `k` back to a record value; `None` when absent.
    pub fn decode(&self, k: usize, overall: f64) -> Option<f64> {
        (self.present.get(k) == Some(&true)).then(|| decode_record_entry(self.entries[k], overall))
    }
}

/// Inverse of the record-slice encoding: entry * phi(overall), then undo the
/// log scaling.
pub fn decode_record_entry(entry: f64, overall: f64) -> f64 {
    (entry * phi(overall)).exp_m1()
}

/// Trained embeddings plus the influence values refined by the second
/// training phase. Self-contained for forecasting: record slices, window
/// overalls and influences all live here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingModel {
    pub config: EmbeddingConfig,
    pub seed: u64,
    /// Window the graph was built over; record slices anchor at its end.
    pub window: SlotRange,
    pub statics: BTreeMap<String, Vec<f64>>,
    pub records: BTreeMap<String, RecordSlice>,
    /// Window-scoped overall records, the decode normalizers.
    pub overalls: BTreeMap<String, f64>,
    /// Influence edges after the influence phase, sorted by (source, target).
    pub influences: Vec<InfluenceEdge>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_is_log1p() {
        assert_eq!(phi(0.0), 0.0);
        assert!((phi(std::f64::consts::E - 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn category_vectors_are_unit_deterministic_and_distinct() {
        let a = category_vector("cafe", 16, 7);
        let b = category_vector("cafe", 16, 7);
        let c = category_vector("gym", 16, 7);
        let d = category_vector("cafe", 16, 8);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
        let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn record_slice_encodes_trailing_window_and_decodes_back() {
        let series = TimeSeries::from_values(vec![5.0, 0.0, 12.0, 30.0, 9.0]).unwrap();
        let window = SlotRange::new(0, 5).unwrap();
        let overall = 56.0;
        let slice = RecordSlice::build(&series, window, 3, overall);
        assert_eq!(slice.present, vec![true, true, true]);
        // Entries cover slots 2, 3, 4 in order.
        for (k, slot) in [(0usize, 2usize), (1, 3), (2, 4)] {
            assert_eq!(RecordSlice::slot_of(window, 3, k), Some(slot));
            assert_eq!(RecordSlice::index_of(window, 3, slot), Some(k));
            let v = series.get(slot).unwrap();
            assert!((slice.entries[k] - phi(v) / phi(overall)).abs() < 1e-15);
            let back = slice.decode(k, overall).unwrap();
            assert!((back - v).abs() < 1e-9 * v.max(1.0), "{back} vs {v}");
        }
        assert_eq!(RecordSlice::index_of(window, 3, 1), None);
    }

    #[test]
    fn record_slice_pads_left_of_short_windows() {
        let series = TimeSeries::from_values(vec![4.0, 6.0]).unwrap();
        let window = SlotRange::new(0, 2).unwrap();
        let slice = RecordSlice::build(&series, window, 4, 10.0);
        assert_eq!(slice.present, vec![false, false, true, true]);
        assert_eq!(slice.entries[0], 0.0);
        assert_eq!(RecordSlice::slot_of(window, 4, 0), None);
        assert_eq!(RecordSlice::slot_of(window, 4, 2), Some(0));
    }

    #[test]
    fn record_slice_marks_absent_slots() {
        let mut series = TimeSeries::absent(3);
        series.set(0, 2.0).unwrap();
        series.set(2, 8.0).unwrap();
        let window = SlotRange::new(0, 3).unwrap();
        let slice = RecordSlice::build(&series, window, 3, 10.0);
        assert_eq!(slice.present, vec![true, false, true]);
        assert_eq!(slice.entries[1], 0.0);
        assert_eq!(slice.decode(1, 10.0), None);
    }

    #[test]
    fn zero_overall_slices_are_fully_absent() {
        let series = TimeSeries::from_values(vec![1.0, 2.0]).unwrap();
        let window = SlotRange::new(0, 2).unwrap();
        let slice = RecordSlice::build(&series, window, 2, 0.0);
        assert_eq!(slice.present, vec![false, false]);
    }

    #[test]
    fn config_validation_rejects_degenerate_values() {
        let ok = EmbeddingConfig::default();
        assert!(ok.validate().is_ok());
        for broken in [
            EmbeddingConfig { static_dim: 0, ..ok.clone() },
            EmbeddingConfig { record_window: 0, ..ok.clone() },
            EmbeddingConfig { learning_rate: 0.0, ..ok.clone() },
            EmbeddingConfig { learning_rate: f64::NAN, ..ok.clone() },
            EmbeddingConfig { batch_size: 0, ..ok.clone() },
            EmbeddingConfig { similarity_band: -0.1, ..ok.clone() },
        ] {
            assert!(broken.validate().is_err());
        }
    }
}
