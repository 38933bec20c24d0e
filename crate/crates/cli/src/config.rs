//! Layered run configuration.
//!
//! Every knob resolves as CLI flag > config file > built-in default; the
//! seed additionally honors the SSTKG_SEED environment variable between
//! flag and file. The resolved [`EffectiveConfig`] is echoed into every
//! output artifact so each reported number carries the settings that
//! produced it.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sstkg_core::data::SlotRange;
use sstkg_core::embedding::EmbeddingConfig;
use sstkg_core::graph::BuildConfig;

use crate::{usage, CliResult};

#[derive(Debug, Clone, Default, clap::Args)]
pub struct ConfigFlags {
    /// JSON config file; `sstkg.json` in the working directory is picked up
    /// automatically when present.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Neighborhood radius in kilometers.
    #[arg(long)]
    pub threshold_km: Option<f64>,
    /// Ridge strength of the influence regression.
    #[arg(long)]
    pub ridge_lambda: Option<f64>,
    /// Influence magnitude below which edges are pruned.
    #[arg(long)]
    pub prune_epsilon: Option<f64>,
    /// Width of the trainable static embedding slice.
    #[arg(long)]
    pub static_dim: Option<usize>,
    /// Trailing window slots frozen into the record slice.
    #[arg(long)]
    pub record_window: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Epochs of the static-slice training phase.
    #[arg(long)]
    pub epochs_embedding: Option<usize>,
    /// Epochs of the influence training phase.
    #[arg(long)]
    pub epochs_influence: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Entity-swap negatives per positive sample.
    #[arg(long)]
    pub negatives_per_sample: Option<usize>,
    /// Relative overall-record band for negative sampling.
    #[arg(long)]
    pub similarity_band: Option<f64>,
    /// Worker threads for graph construction; 1 is bit-reproducible.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Training seed. SSTKG_SEED overrides the config-file value; this flag
    /// overrides both.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Accuracy tolerance in percent (the n of acc@n).
    #[arg(long)]
    pub acc_percent: Option<f64>,
}

/// sstkg.json schema: every key optional, field names matching the library
/// configs, unknown keys rejected.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    distance_threshold_km: Option<f64>,
    ridge_lambda: Option<f64>,
    prune_epsilon: Option<f64>,
    static_dim: Option<usize>,
    record_window: Option<usize>,
    learning_rate: Option<f64>,
    epochs_embedding: Option<usize>,
    epochs_influence: Option<usize>,
    batch_size: Option<usize>,
    negatives_per_sample: Option<usize>,
    similarity_band: Option<f64>,
    workers: Option<usize>,
    seed: Option<u64>,
    acc_percent: Option<f64>,
}

/// Fully resolved settings for one invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveConfig {
    pub distance_threshold_km: f64,
    pub ridge_lambda: f64,
    pub prune_epsilon: f64,
    pub embedding: EmbeddingConfig,
    pub workers: usize,
    pub seed: u64,
    pub acc_percent: f64,
}

impl EffectiveConfig {
    pub fn build_config(&self, training_window: SlotRange) -> BuildConfig {
        BuildConfig::new(training_window)
            .with_threshold_km(self.distance_threshold_km)
            .with_ridge_lambda(self.ridge_lambda)
            .with_prune_epsilon(self.prune_epsilon)
            .with_workers(self.workers)
    }
}

pub fn effective(flags: &ConfigFlags) -> CliResult<EffectiveConfig> {
    let file = load_file(flags)?;
    let env_seed = env_seed()?;
    let e = EmbeddingConfig::default();
    // Window is irrelevant here; only the numeric defaults are read.
    let b = BuildConfig::new(SlotRange::new(0, 1).expect("non-empty"));
    Ok(EffectiveConfig {
        distance_threshold_km: flags
            .threshold_km
            .or(file.distance_threshold_km)
            .unwrap_or(b.distance_threshold_km),
        ridge_lambda: flags.ridge_lambda.or(file.ridge_lambda).unwrap_or(b.ridge_lambda),
        prune_epsilon: flags.prune_epsilon.or(file.prune_epsilon).unwrap_or(b.prune_epsilon),
        embedding: EmbeddingConfig {
            static_dim: flags.static_dim.or(file.static_dim).unwrap_or(e.static_dim),
            record_window: flags.record_window.or(file.record_window).unwrap_or(e.record_window),
            learning_rate: flags.learning_rate.or(file.learning_rate).unwrap_or(e.learning_rate),
            epochs_embedding: flags
                .epochs_embedding
                .or(file.epochs_embedding)
                .unwrap_or(e.epochs_embedding),
            epochs_influence: flags
                .epochs_influence
                .or(file.epochs_influence)
                .unwrap_or(e.epochs_influence),
            batch_size: flags.batch_size.or(file.batch_size).unwrap_or(e.batch_size),
            negatives_per_sample: flags
                .negatives_per_sample
                .or(file.negatives_per_sample)
                .unwrap_or(e.negatives_per_sample),
            similarity_band: flags
                .similarity_band
                .or(file.similarity_band)
                .unwrap_or(e.similarity_band),
        },
        workers: flags.workers.or(file.workers).unwrap_or(b.workers),
        seed: flags.seed.or(env_seed).or(file.seed).unwrap_or(0),
        acc_percent: flags.acc_percent.or(file.acc_percent).unwrap_or(10.0),
    })
}

fn env_seed() -> CliResult<Option<u64>> {
    match std::env::var("SSTKG_SEED") {
        Ok(v) => v
            .parse::<u64>()
            .map(Some)
            .map_err(|_| usage(format!("SSTKG_SEED {v:?} is not a 64-bit unsigned integer"))),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(usage(format!("SSTKG_SEED: {e}"))),
    }
}

fn load_file(flags: &ConfigFlags) -> CliResult<FileConfig> {
    let path = match &flags.config {
        Some(p) => p.clone(),
        None => {
            let p = PathBuf::from("sstkg.json");
            if !p.exists() {
                return Ok(FileConfig::default());
            }
            p
        }
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| usage(format!("config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))
}
