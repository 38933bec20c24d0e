//! RFC-4180 CSV ingestion for entities.csv and records.csv.

use std::collections::HashMap;
use std::path::Path;

use crate::data::{Entity, EntitySet, GeoPoint, TimeIndex, TimeSeries};
use crate::error::{Error, Result};

/// Ingestion output: the canonical entity set plus the ids that were dropped
/// for having zero total records (the caller decides how to surface them).
#[derive(Debug)]
pub struct ParsedDataset {
    pub entities: EntitySet,
    /// Ids excluded because their series has zero total records, sorted.
    pub excluded: Vec<String>,
}

/// Parses `entities.csv` (header `id,lat,lon,category`) and `records.csv`
/// (header `id,slot,value`) into an [`EntitySet`] over `time`.
///
/// Slots absent from records.csv stay absent; they are never filled with
/// zeros. Entities whose series sums to zero are excluded and reported in
/// [`ParsedDataset::excluded`] so Eq.-style ratios never divide by zero
/// overall records downstream.
pub fn parse_dataset(
    entities_csv: &Path,
    records_csv: &Path,
    time: TimeIndex,
) -> Result<ParsedDataset> {
    let entities_file = entities_csv.display().to_string();
    let records_file = records_csv.display().to_string();

    let mut reader = open_reader(entities_csv, &entities_file, &["id", "lat", "lon", "category"])?;
    let mut order: Vec<String> = Vec::new();
    let mut partial: HashMap<String, (GeoPoint, String, TimeSeries)> = HashMap::new();

    for row in reader.records() {
        let rec = row.map_err(|e| csv_error(&entities_file, &e))?;
        let line = record_line(&rec);
        let id = field(&rec, 0, "id", &entities_file, line)?;
        if id.is_empty() {
            return Err(Error::Csv {
                file: entities_file.clone(),
                line,
                field: "id".into(),
                message: "empty id".into(),
            });
        }
        let lat: f64 = parse_field(&rec, 1, "lat", &entities_file, line)?;
        let lon: f64 = parse_field(&rec, 2, "lon", &entities_file, line)?;
        let location = GeoPoint::new(lat, lon).map_err(|e| Error::Csv {
            file: entities_file.clone(),
            line,
            field: if !(-90.0..=90.0).contains(&lat) || !lat.is_finite() {
                "lat".into()
            } else {
                "lon".into()
            },
            message: e.to_string(),
        })?;
        let category = field(&rec, 3, "category", &entities_file, line)?;
        if partial.contains_key(&id) {
            return Err(Error::Duplicate {
                file: entities_file.clone(),
                line,
                what: format!("entity id {id:?}"),
            });
        }
        order.push(id.clone());
        partial.insert(id, (location, category, TimeSeries::absent(time.slot_count)));
    }

    let mut reader = open_reader(records_csv, &records_file, &["id", "slot", "value"])?;
    let mut seen_slot: HashMap<(String, usize), ()> = HashMap::new();
    for row in reader.records() {
        let rec = row.map_err(|e| csv_error(&records_file, &e))?;
        let line = record_line(&rec);
        let id = field(&rec, 0, "id", &records_file, line)?;
        let slot: usize = parse_field(&rec, 1, "slot", &records_file, line)?;
        let value: f64 = parse_field(&rec, 2, "value", &records_file, line)?;
        let Some((_, _, series)) = partial.get_mut(&id) else {
            return Err(Error::UnknownRecordId {
                file: records_file.clone(),
                line,
                id,
            });
        };
        if slot >= time.slot_count {
            return Err(Error::Csv {
                file: records_file.clone(),
                line,
                field: "slot".into(),
                message: format!("slot {slot} outside [0, {})", time.slot_count),
            });
        }
        if !value.is_finite() || value < 0.0 {
            return Err(Error::Csv {
                file: records_file.clone(),
                line,
                field: "value".into(),
                message: format!("value {value} must be a non-negative finite real"),
            });
        }
        if seen_slot.insert((id.clone(), slot), ()).is_some() {
            return Err(Error::Duplicate {
                file: records_file.clone(),
                line,
                what: format!("record for ({id:?}, slot {slot})"),
            });
        }
        series.set(slot, value).map_err(|e| Error::Csv {
            file: records_file.clone(),
            line,
            field: "value".into(),
            message: e.to_string(),
        })?;
    }

    let full = crate::data::SlotRange::new(0, time.slot_count)?;
    let mut entities = Vec::new();
    let mut excluded = Vec::new();
    for id in order {
        let (location, category, series) = partial.remove(&id).expect("id recorded in order");
        let overall = series.present_sum(full);
        if overall == 0.0 {
            excluded.push(id);
            continue;
        }
        entities.push(Entity {
            id,
            location,
            category,
            series,
            overall_record: overall,
        });
    }
    excluded.sort();

    Ok(ParsedDataset {
        entities: EntitySet::new(entities, time)?,
        excluded,
    })
}

fn open_reader(path: &Path, file: &str, expected_header: &[&str]) -> Result<csv::Reader<std::fs::File>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::Csv {
                file: file.to_string(),
                line: 1,
                field: "header".into(),
                message: format!("{other:?}"),
            },
        })?;
    let headers = reader.headers().map_err(|e| csv_error(file, &e))?;
    let got: Vec<&str> = headers.iter().collect();
    if got != expected_header {
        return Err(Error::Csv {
            file: file.to_string(),
            line: 1,
            field: "header".into(),
            message: format!("expected {expected_header:?}, found {got:?}"),
        });
    }
    Ok(reader)
}

fn record_line(rec: &csv::StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

fn csv_error(file: &str, err: &csv::Error) -> Error {
    let line = match err.kind() {
        csv::ErrorKind::UnequalLengths { pos, .. } => {
            pos.as_ref().map(|p| p.line()).unwrap_or(0)
        }
        _ => err.position().map(|p| p.line()).unwrap_or(0),
    };
    Error::Csv {
        file: file.to_string(),
        line,
        field: "row".into(),
        message: err.to_string(),
    }
}

fn field(
    rec: &csv::StringRecord,
    idx: usize,
    name: &str,
    file: &str,
    line: u64,
) -> Result<String> {
    rec.get(idx)
        .map(|s| s.to_string())
        .ok_or_else(|| Error::Csv {
            file: file.to_string(),
            line,
            field: name.to_string(),
            message: "missing field".into(),
        })
}

fn parse_field<T: std::str::FromStr>(
    rec: &csv::StringRecord,
    idx: usize,
    name: &str,
    file: &str,
    line: u64,
) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = field(rec, idx, name, file, line)?;
    raw.trim().parse::<T>().map_err(|e| Error::Csv {
        file: file.to_string(),
        line,
        field: name.to_string(),
        message: format!("cannot parse {raw:?}: {e}"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_file(dir: &Path, name: &str, contents: &str) -> std::path::PathBuf {
        let path = dir.join(name);
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        path
    }

    fn time(slots: usize) -> TimeIndex {
        TimeIndex::new(0, 86_400, slots).unwrap()
    }

    #[test]
    fn round_trip_small_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let e = write_file(
            dir.path(),
            "entities.csv",
            "id,lat,lon,category\na,1.0,2.0,shop\nb,1.5,2.5,\"cafe, corner\"\n",
        );
        let r = write_file(
            dir.path(),
            "records.csv",
            "id,slot,value\na,0,10.0\na,2,30.0\nb,1,5.5\n",
        );
        let parsed = parse_dataset(&e, &r, time(3)).unwrap();
        assert!(parsed.excluded.is_empty());
        let set = parsed.entities;
        assert_eq!(set.len(), 2);
        let a = set.by_id("a").unwrap();
        assert_eq!(a.series.get(0), Some(10.0));
        assert_eq!(a.series.get(1), None);
        assert_eq!(a.overall_record, 40.0);
        let b = set.by_id("b").unwrap();
        assert_eq!(b.category, "cafe, corner");
        assert_eq!(b.overall_record, 5.5);
    }

    #[test]
    fn latitude_out_of_range_names_field() {
        let dir = tempfile::tempdir().unwrap();
        let e = write_file(
            dir.path(),
            "entities.csv",
            "id,lat,lon,category\na,91.0,0.0,x\n",
        );
        let r = write_file(dir.path(), "records.csv", "id,slot,value\n");
        let err = parse_dataset(&e, &r, time(1)).unwrap_err();
        match err {
            Error::Csv { field, line, .. } => {
                assert_eq!(field, "lat");
                assert_eq!(line, 2);
            }
            other => panic!("expected csv range error, got {other}"),
        }
    }

    #[test]
    fn duplicate_entity_id_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let e = write_file(
            dir.path(),
            "entities.csv",
            "id,lat,lon,category\na,0,0,x\na,1,1,y\n",
        );
        let r = write_file(dir.path(), "records.csv", "id,slot,value\na,0,1\n");
        assert!(matches!(
            parse_dataset(&e, &r, time(1)).unwrap_err(),
            Error::Duplicate { line: 3, .. }
        ));
    }

    #[test]
    fn slot_out_of_range_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let e = write_file(dir.path(), "entities.csv", "id,lat,lon,category\na,0,0,x\n");
        let r = write_file(dir.path(), "records.csv", "id,slot,value\na,3,1.0\n");
        let err = parse_dataset(&e, &r, time(3)).unwrap_err();
        match err {
            Error::Csv { field, message, .. } => {
                assert_eq!(field, "slot");
                assert!(message.contains("outside [0, 3)"), "{message}");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn unknown_record_id_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let e = write_file(dir.path(), "entities.csv", "id,lat,lon,category\na,0,0,x\n");
        let r = write_file(dir.path(), "records.csv", "id,slot,value\nzz,0,1.0\n");
        assert!(matches!(
            parse_dataset(&e, &r, time(1)).unwrap_err(),
            Error::UnknownRecordId { line: 2, .. }
        ));
    }

    #[test]
    fn zero_record_entities_excluded_with_warning() {
        let dir = tempfile::tempdir().unwrap();
        let e = write_file(
            dir.path(),
            "entities.csv",
            "id,lat,lon,category\na,0,0,x\nb,1,1,y\nc,2,2,z\n",
        );
        // b has no rows at all; c has rows that sum to zero. Both are dropped.
        let r = write_file(
            dir.path(),
            "records.csv",
            "id,slot,value\na,0,4.0\nc,0,0.0\nc,1,0.0\n",
        );
        let parsed = parse_dataset(&e, &r, time(2)).unwrap();
        assert_eq!(parsed.excluded, vec!["b".to_string(), "c".to_string()]);
        assert_eq!(parsed.entities.len(), 1);
        assert!(parsed.entities.by_id("a").is_ok());
    }

    #[test]
    fn duplicate_record_slot_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let e = write_file(dir.path(), "entities.csv", "id,lat,lon,category\na,0,0,x\n");
        let r = write_file(
            dir.path(),
            "records.csv",
            "id,slot,value\na,0,1.0\na,0,2.0\n",
        );
        assert!(matches!(
            parse_dataset(&e, &r, time(1)).unwrap_err(),
            Error::Duplicate { line: 3, .. }
        ));
    }

    #[test]
    fn malformed_value_names_file_line_field() {
        let dir = tempfile::tempdir().unwrap();
        let e = write_file(dir.path(), "entities.csv", "id,lat,lon,category\na,0,0,x\n");
        let r = write_file(dir.path(), "records.csv", "id,slot,value\na,0,abc\n");
        let err = parse_dataset(&e, &r, time(1)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("records.csv"), "{msg}");
        assert!(msg.contains(":2:"), "{msg}");
        assert!(msg.contains("value"), "{msg}");
    }

    #[test]
    fn negative_value_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let e = write_file(dir.path(), "entities.csv", "id,lat,lon,category\na,0,0,x\n");
        let r = write_file(dir.path(), "records.csv", "id,slot,value\na,0,-1.0\n");
        let err = parse_dataset(&e, &r, time(1)).unwrap_err();
        match err {
            Error::Csv { field, .. } => assert_eq!(field, "value"),
            other => panic!("unexpected {other}"),
        }
    }
}
