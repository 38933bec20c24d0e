//! Report artifacts written by eval, explain and mask. Each embeds the
//! effective configuration so the numbers stay reproducible from the file
//! alone.

use serde::{Deserialize, Serialize};
use sstkg_core::data::SlotRange;
use sstkg_core::inference::{Explanation, Method};
use sstkg_core::metrics::Accuracy;
use sstkg_core::persist::{Artifact, ArtifactKind};
use sstkg_core::stats::TTestReport;

use crate::config::EffectiveConfig;

/// Body of metrics.json.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub config: EffectiveConfig,
    pub method: Method,
    pub train_slots: SlotRange,
    pub test_slots: SlotRange,
    /// Target scope; None means every entity.
    pub ids: Option<Vec<String>>,
    /// (real, predicted) pairs that entered the metrics.
    pub pairs: u64,
    pub acc: Accuracy,
    pub rms: f64,
    pub rsd: f64,
    /// Two-sided paired test of real vs predicted.
    pub t_test: TTestReport,
}

impl Artifact for MetricsReport {
    const KIND: ArtifactKind = ArtifactKind::Report;
}

/// Body of the explain artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainReport {
    pub config: EffectiveConfig,
    pub explanation: Explanation,
}

impl Artifact for ExplainReport {
    const KIND: ArtifactKind = ArtifactKind::Report;
}

/// Body of the optional mask report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskReport {
    pub config: EffectiveConfig,
    pub target: String,
    pub masked: Vec<String>,
    pub method: Method,
    pub slots: SlotRange,
    /// One-sided (or two-sided) paired test of R0 vs R_masked.
    pub t_test: TTestReport,
}

impl Artifact for MaskReport {
    const KIND: ArtifactKind = ArtifactKind::Report;
}
