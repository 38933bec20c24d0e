//! Dataset directory conventions: `entities.csv` + `records.csv` form the
//! dataset; `synthetic.json`, when present, supplies the slot count so
//! generated worlds need no extra flags.

use std::path::{Path, PathBuf};

use sstkg_core::data::{parse_dataset, EntitySet, SyntheticSpec, TimeIndex};

use crate::{usage, CliResult, StageExt};

#[derive(Debug, clap::Args)]
pub struct DataArgs {
    /// Directory holding entities.csv and records.csv.
    #[arg(long)]
    pub data: PathBuf,
    /// Slots in the grid; defaults to slot_count from synthetic.json in the
    /// dataset directory.
    #[arg(long)]
    pub slot_count: Option<usize>,
    /// Slot length in seconds.
    #[arg(long, default_value_t = 86_400)]
    pub slot_length: i64,
    /// UTC seconds of the first slot boundary.
    #[arg(long, default_value_t = 0)]
    pub slot_start: i64,
}

impl DataArgs {
    pub fn slot_count(&self) -> CliResult<usize> {
        if let Some(n) = self.slot_count {
            return Ok(n);
        }
        let path = self.data.join("synthetic.json");
        if !path.exists() {
            return Err(usage(format!(
                "pass --slot-count: {} has no synthetic.json to take the slot count from",
                self.data.display()
            )));
        }
        let text = std::fs::read_to_string(&path).stage("ingest")?;
        let spec: SyntheticSpec = serde_json::from_str(&text)
            .map_err(|e| usage(format!("{}: {e}", path.display())))?;
        Ok(spec.slot_count)
    }

    pub fn time_index(&self) -> CliResult<TimeIndex> {
        TimeIndex::new(self.slot_start, self.slot_length, self.slot_count()?)
            .map_err(|e| usage(e.to_string()))
    }

    /// Parses the dataset, reporting zero-record exclusions on stderr.
    pub fn load(&self) -> CliResult<EntitySet> {
        let time = self.time_index()?;
        let parsed = parse_dataset(
            &self.data.join("entities.csv"),
            &self.data.join("records.csv"),
            time,
        )
        .stage("ingest")?;
        if !parsed.excluded.is_empty() {
            eprintln!(
                "warning: excluded {} zero-record entities: {}",
                parsed.excluded.len(),
                parsed.excluded.join(", ")
            );
        }
        Ok(parsed.entities)
    }
}

pub fn write_entities_csv(path: &Path, set: &EntitySet) -> csv::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["id", "lat", "lon", "category"])?;
    for e in set.entities() {
        w.write_record([
            e.id.as_str(),
            &e.location.lat.to_string(),
            &e.location.lon.to_string(),
            e.category.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_records_csv(path: &Path, set: &EntitySet) -> csv::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["id", "slot", "value"])?;
    for e in set.entities() {
        for (slot, v) in e.series.values().iter().enumerate() {
            if let Some(v) = v {
                w.write_record([e.id.as_str(), &slot.to_string(), &v.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
