//! Great-circle distances and neighborhood queries.

use crate::data::{EntitySet, GeoPoint};

/// Mean Earth radius in kilometers.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Distinct co-located entities are held apart at one meter so distance
/// ratios stay finite.
pub const MIN_DISTANCE_KM: f64 = 0.001;

/// Haversine great-circle distance in kilometers. Zero iff the points
/// coincide; no flooring happens here.
pub fn haversine_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let lat_a = a.lat.to_radians();
    let lat_b = b.lat.to_radians();
    let d_lat = (b.lat - a.lat).to_radians();
    let d_lon = (b.lon - a.lon).to_radians();
    let h = (d_lat / 2.0).sin().powi(2) + lat_a.cos() * lat_b.cos() * (d_lon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// A neighborhood member: entity index plus its floored distance to the
/// query entity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance_km: f64,
}

/// All entities within `threshold_km` of entity `target` (itself excluded),
/// sorted ascending by distance with ties broken by id. Distances are
/// floored at [`MIN_DISTANCE_KM`].
pub fn neighbors_within(set: &EntitySet, target: usize, threshold_km: f64) -> Vec<Neighbor> {
    let origin = set.entity(target).location;
    let mut out: Vec<Neighbor> = (0..set.len())
        .filter(|&j| j != target)
        .filter_map(|j| {
            let d = haversine_km(origin, set.entity(j).location).max(MIN_DISTANCE_KM);
            (d <= threshold_km).then_some(Neighbor {
                index: j,
                distance_km: d,
            })
        })
        .collect();
    out.sort_by(|a, b| {
        a.distance_km
            .total_cmp(&b.distance_km)
            .then_with(|| set.entity(a.index).id.cmp(&set.entity(b.index).id))
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Entity, TimeIndex, TimeSeries};

    fn point(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    #[test]
    fn one_degree_of_longitude_at_equator() {
        let d = haversine_km(point(0.0, 0.0), point(0.0, 1.0));
        assert!((d - 111.19).abs() < 0.01, "{d}");
    }

    #[test]
    fn zero_iff_coincident() {
        let p = point(48.8566, 2.3522);
        assert_eq!(haversine_km(p, p), 0.0);
        let q = point(48.8566, 2.3523);
        assert!(haversine_km(p, q) > 0.0);
    }

    #[test]
    fn symmetric() {
        let a = point(10.0, 20.0);
        let b = point(-33.9, 151.2);
        assert_eq!(haversine_km(a, b), haversine_km(b, a));
    }

    #[test]
    fn antipodal_is_half_circumference() {
        let d = haversine_km(point(0.0, 0.0), point(0.0, 180.0));
        let half = std::f64::consts::PI * EARTH_RADIUS_KM;
        assert!((d - half).abs() < 1e-6, "{d} vs {half}");
    }

    fn entity_at(id: &str, lat: f64, lon: f64) -> Entity {
        Entity {
            id: id.into(),
            location: point(lat, lon),
            category: "c".into(),
            series: TimeSeries::from_values(vec![1.0]).unwrap(),
            overall_record: 1.0,
        }
    }

    #[test]
    fn neighbors_sorted_by_distance_then_id() {
        let t = TimeIndex::new(0, 86_400, 1).unwrap();
        // b and c sit at the same distance from a; d is farther; e is outside.
        let set = EntitySet::new(
            vec![
                entity_at("a", 0.0, 0.0),
                entity_at("c", 0.0, 0.004),
                entity_at("b", 0.0, -0.004),
                entity_at("d", 0.0, 0.009),
                entity_at("e", 0.0, 0.5),
            ],
            t,
        )
        .unwrap();
        let a = set.index_of("a").unwrap();
        let got: Vec<&str> = neighbors_within(&set, a, 2.0)
            .iter()
            .map(|n| set.entity(n.index).id.as_str())
            .collect();
        assert_eq!(got, ["b", "c", "d"]);
    }

    #[test]
    fn co_located_distance_floored_at_one_meter() {
        let t = TimeIndex::new(0, 86_400, 1).unwrap();
        let set = EntitySet::new(
            vec![entity_at("a", 1.0, 1.0), entity_at("b", 1.0, 1.0)],
            t,
        )
        .unwrap();
        let nbrs = neighbors_within(&set, 0, 2.0);
        assert_eq!(nbrs.len(), 1);
        assert_eq!(nbrs[0].distance_km, MIN_DISTANCE_KM);
    }
}
