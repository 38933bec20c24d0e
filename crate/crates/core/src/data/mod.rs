//! Entity, time-series and dataset types plus CSV ingestion and the
//! synthetic-world generator.

mod parse;
mod synthetic;

pub use parse::{parse_dataset, ParsedDataset};
pub use synthetic::{generate_synthetic, GroundTruth, GroundTruthEdge, SyntheticWorld};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// WGS-84 coordinate in decimal degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !lat.is_finite() || !(-90.0..=90.0).contains(&lat) {
            return Err(Error::InvalidConfig(format!(
                "latitude {lat} outside [-90, 90]"
            )));
        }
        if !lon.is_finite() || !(-180.0..=180.0).contains(&lon) {
            return Err(Error::InvalidConfig(format!(
                "longitude {lon} outside [-180, 180]"
            )));
        }
        Ok(Self { lat, lon })
    }
}

/// Uniform slot grid: slot k covers `[start + k * slot_length, start + (k+1) * slot_length)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeIndex {
    /// UTC seconds of the first slot boundary.
    pub start: i64,
    /// Slot length in seconds, strictly positive.
    pub slot_length: i64,
    pub slot_count: usize,
}

impl TimeIndex {
    pub fn new(start: i64, slot_length: i64, slot_count: usize) -> Result<Self> {
        if slot_length <= 0 {
            return Err(Error::InvalidConfig(format!(
                "slot_length {slot_length} must be positive"
            )));
        }
        if slot_count == 0 {
            return Err(Error::InvalidConfig("slot_count must be positive".into()));
        }
        Ok(Self {
            start,
            slot_length,
            slot_count,
        })
    }
}

/// Half-open slot range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotRange {
    pub start: usize,
    pub end: usize,
}

impl SlotRange {
    pub fn new(start: usize, end: usize) -> Result<Self> {
        if start >= end {
            return Err(Error::InvalidConfig(format!(
                "empty slot range {start}..{end}"
            )));
        }
        Ok(Self { start, end })
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }

    pub fn contains(&self, slot: usize) -> bool {
        slot >= self.start && slot < self.end
    }

    pub fn iter(&self) -> std::ops::Range<usize> {
        self.start..self.end
    }
}

/// Record series over the slot grid. Absent slots are explicit; they are
/// never conflated with zero values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    values: Vec<Option<f64>>,
}

impl TimeSeries {
    pub fn absent(slot_count: usize) -> Self {
        Self {
            values: vec![None; slot_count],
        }
    }

    /// Builds a fully-present series. Values must be non-negative and finite.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        for (slot, v) in values.iter().enumerate() {
            check_record_value(*v, slot)?;
        }
        Ok(Self {
            values: values.into_iter().map(Some).collect(),
        })
    }

    pub fn set(&mut self, slot: usize, value: f64) -> Result<()> {
        check_record_value(value, slot)?;
        self.values[slot] = Some(value);
        Ok(())
    }

    pub fn get(&self, slot: usize) -> Option<f64> {
        self.values.get(slot).copied().flatten()
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Sum of present values over `range`; absent slots contribute nothing.
    pub fn present_sum(&self, range: SlotRange) -> f64 {
        self.values[range.start..range.end.min(self.values.len())]
            .iter()
            .flatten()
            .sum()
    }

    pub fn present_count(&self, range: SlotRange) -> usize {
        self.values[range.start..range.end.min(self.values.len())]
            .iter()
            .filter(|v| v.is_some())
            .count()
    }

    /// Value of the first present slot, if any.
    pub fn earliest_present(&self) -> Option<f64> {
        self.values.iter().copied().flatten().next()
    }

    /// Most recent present value at a slot strictly before `slot`.
    pub fn last_present_before(&self, slot: usize) -> Option<f64> {
        self.values[..slot.min(self.values.len())]
            .iter()
            .rev()
            .copied()
            .flatten()
            .next()
    }
}

fn check_record_value(value: f64, slot: usize) -> Result<()> {
    if !value.is_finite() || value < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "record value {value} at slot {slot} must be a non-negative finite real"
        )));
    }
    Ok(())
}

/// A located entity with its record series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: String,
    pub location: GeoPoint,
    pub category: String,
    pub series: TimeSeries,
    /// Sum of present record values over the full series. Graph construction
    /// recomputes window-scoped sums; this field is never trusted from input.
    pub overall_record: f64,
}

/// Entities in canonical id order with an id lookup table.
#[derive(Debug, Clone)]
pub struct EntitySet {
    entities: Vec<Entity>,
    by_id: HashMap<String, usize>,
    time_index: TimeIndex,
}

impl EntitySet {
    /// Canonicalizes by sorting on id so downstream output is independent of
    /// input row order. Entities with zero present records are rejected by
    /// the ingestion layer before this point.
    pub fn new(mut entities: Vec<Entity>, time_index: TimeIndex) -> Result<Self> {
        entities.sort_by(|a, b| a.id.cmp(&b.id));
        let mut by_id = HashMap::with_capacity(entities.len());
        for (idx, e) in entities.iter().enumerate() {
            if e.series.len() != time_index.slot_count {
                return Err(Error::InvalidConfig(format!(
                    "entity {:?} has {} slots, time index has {}",
                    e.id,
                    e.series.len(),
                    time_index.slot_count
                )));
            }
            if by_id.insert(e.id.clone(), idx).is_some() {
                return Err(Error::InvalidConfig(format!("duplicate entity id {:?}", e.id)));
            }
        }
        Ok(Self {
            entities,
            by_id,
            time_index,
        })
    }

    pub fn time_index(&self) -> TimeIndex {
        self.time_index
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn entity(&self, idx: usize) -> &Entity {
        &self.entities[idx]
    }

    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub fn by_id(&self, id: &str) -> Result<&Entity> {
        self.index_of(id)
            .map(|i| &self.entities[i])
            .ok_or_else(|| Error::UnknownEntity(id.to_string()))
    }

    /// Per-entity sums of present values over `window`, in entity order.
    pub fn window_overalls(&self, window: SlotRange) -> Vec<f64> {
        self.entities
            .iter()
            .map(|e| e.series.present_sum(window))
            .collect()
    }
}

/// Parameters of the synthetic-world generator. Serialized verbatim as
/// synthetic.json.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub entity_count: usize,
    pub bounding_box: BoundingBox,
    pub category_pool: Vec<String>,
    pub slot_count: usize,
    /// Probability that an eligible within-threshold pair carries influence.
    pub influence_density: f64,
    /// Standard deviation of Gaussian observation noise added to derived
    /// series; 0 disables noise.
    pub noise_sigma: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min: GeoPoint,
    pub max: GeoPoint,
}

impl BoundingBox {
    pub fn validate(&self) -> Result<()> {
        if self.min.lat >= self.max.lat || self.min.lon >= self.max.lon {
            return Err(Error::InvalidConfig(
                "bounding box must have positive area".into(),
            ));
        }
        Ok(())
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.entity_count == 0 {
            return Err(Error::InvalidConfig("entity_count must be positive".into()));
        }
        if self.slot_count == 0 {
            return Err(Error::InvalidConfig("slot_count must be positive".into()));
        }
        if !(self.influence_density > 0.0 && self.influence_density <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "influence_density {} outside (0, 1]",
                self.influence_density
            )));
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "noise_sigma {} must be a non-negative finite real",
                self.noise_sigma
            )));
        }
        if self.category_pool.is_empty() {
            return Err(Error::InvalidConfig("category_pool must be non-empty".into()));
        }
        self.bounding_box.validate()?;
        GeoPoint::new(self.bounding_box.min.lat, self.bounding_box.min.lon)?;
        GeoPoint::new(self.bounding_box.max.lat, self.bounding_box.max.lon)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(values: &[f64]) -> TimeSeries {
        TimeSeries::from_values(values.to_vec()).unwrap()
    }

    #[test]
    fn absent_slots_are_not_zero() {
        let mut s = TimeSeries::absent(4);
        s.set(1, 0.0).unwrap();
        s.set(2, 7.5).unwrap();
        assert_eq!(s.get(0), None);
        assert_eq!(s.get(1), Some(0.0));
        let full = SlotRange::new(0, 4).unwrap();
        assert_eq!(s.present_sum(full), 7.5);
        assert_eq!(s.present_count(full), 2);
    }

    #[test]
    fn negative_and_non_finite_values_rejected() {
        assert!(TimeSeries::from_values(vec![1.0, -0.5]).is_err());
        assert!(TimeSeries::from_values(vec![f64::NAN]).is_err());
        assert!(TimeSeries::from_values(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn entity_set_sorts_by_id() {
        let t = TimeIndex::new(0, 86_400, 2).unwrap();
        let mk = |id: &str| Entity {
            id: id.to_string(),
            location: GeoPoint::new(0.0, 0.0).unwrap(),
            category: "shop".into(),
            series: series(&[1.0, 2.0]),
            overall_record: 3.0,
        };
        let set = EntitySet::new(vec![mk("b"), mk("a"), mk("c")], t).unwrap();
        let ids: Vec<_> = set.entities().iter().map(|e| e.id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert_eq!(set.index_of("b"), Some(1));
    }

    #[test]
    fn geo_point_ranges_enforced() {
        assert!(GeoPoint::new(91.0, 0.0).is_err());
        assert!(GeoPoint::new(-90.5, 0.0).is_err());
        assert!(GeoPoint::new(0.0, 180.5).is_err());
        assert!(GeoPoint::new(45.0, -180.0).is_ok());
    }

    #[test]
    fn padding_helpers() {
        let mut s = TimeSeries::absent(5);
        s.set(2, 4.0).unwrap();
        s.set(4, 9.0).unwrap();
        assert_eq!(s.earliest_present(), Some(4.0));
        assert_eq!(s.last_present_before(4), Some(4.0));
        assert_eq!(s.last_present_before(5), Some(9.0));
        assert_eq!(s.last_present_before(2), None);
    }
}
