//! Forecast quality metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Result of an interval-accuracy computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    /// Fraction of used pairs whose prediction fell inside the interval.
    pub accuracy: f64,
    /// Pairs that entered the denominator.
    pub used: u64,
    /// Pairs dropped because the real value was zero (the relative interval
    /// is empty there).
    pub excluded_zero_real: u64,
}

/// acc@n: share of pairs with predicted strictly inside
/// (real * (1 - n/100), real * (1 + n/100)). Zero-real pairs are excluded
/// from the denominator; if every pair is zero-real the metric is undefined.
pub fn acc_at_n(pairs: &[(f64, f64)], n_percent: f64) -> Result<Accuracy> {
    if pairs.is_empty() {
        return Err(Error::DegenerateMetric("acc@n of an empty pair list".into()));
    }
    if !n_percent.is_finite() || n_percent <= 0.0 {
        return Err(Error::DegenerateMetric(format!(
            "acc@n tolerance {n_percent} must be a positive finite percentage"
        )));
    }
    let band = n_percent / 100.0;
    let mut used = 0_u64;
    let mut hit = 0_u64;
    let mut excluded = 0_u64;
    for &(real, predicted) in pairs {
        if real == 0.0 {
            excluded += 1;
            continue;
        }
        used += 1;
        let lo = real * (1.0 - band);
        let hi = real * (1.0 + band);
        if predicted > lo && predicted < hi {
            hit += 1;
        }
    }
    if used == 0 {
        return Err(Error::DegenerateMetric(
            "acc@n undefined: every pair has a zero real value".into(),
        ));
    }
    Ok(Accuracy {
        accuracy: hit as f64 / used as f64,
        used,
        excluded_zero_real: excluded,
    })
}

/// Relative root-mean-square error:
/// sqrt(sum (real - predicted)^2 / sum real^2).
pub fn rms(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::DegenerateMetric("rms of an empty pair list".into()));
    }
    let num: f64 = pairs.iter().map(|(o, p)| (o - p) * (o - p)).sum();
    let den: f64 = pairs.iter().map(|(o, _)| o * o).sum();
    if den == 0.0 {
        return Err(Error::DegenerateMetric(
            "rms undefined: all real values are zero".into(),
        ));
    }
    Ok((num / den).sqrt())
}

/// Root deviation normalized by count: sqrt(sum (real - predicted)^2 / N).
pub fn rsd(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::DegenerateMetric("rsd of an empty pair list".into()));
    }
    let num: f64 = pairs.iter().map(|(o, p)| (o - p) * (o - p)).sum();
    Ok((num / pairs.len() as f64).sqrt())
}

/// Affine map of `values` onto [lo, hi] anchored at the observed min/max.
/// Errors when all values coincide (the map is undefined).
pub fn normalize_range(values: &[f64], lo: f64, hi: f64) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::DegenerateMetric("normalize of an empty list".into()));
    }
    if hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::DegenerateMetric(format!(
            "normalize range ({lo}, {hi}) is empty"
        )));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == min {
        return Err(Error::DegenerateMetric(
            "normalize undefined: max equals min".into(),
        ));
    }
    Ok(values
        .iter()
        .map(|&x| lo + (hi - lo) * (x - min) / (max - min))
        .collect())
}
