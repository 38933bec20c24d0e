//! Influence regression: least squares on the balance equation
//! p * Record_target(t) = sum_i I_i * Record_source_i(t).

use crate::data::{SlotRange, TimeSeries};
use crate::error::{Error, Result};

/// One regression column: a weighted neighbor of the target.
pub struct RegressionNeighbor<'a> {
    pub id: &'a str,
    pub weight: f64,
    pub series: &'a TimeSeries,
}

/// Fits per-neighbor factors alpha minimizing
///
/// ```text
/// sum_t (p * R_target(t) - sum_i alpha_i * W_i * R_i(t))^2 + lambda * sum_i alpha_i^2
/// ```
///
/// over window slots where the target and every neighbor are present, and
/// returns influences I_i = alpha_i * W_i aligned with `neighbors`.
///
/// Neighbors with zero weight never enter the system and get influence 0.
/// Columns are rescaled to unit RMS internally for conditioning; the ridge
/// penalty is mapped through the scaling, so the minimizer of the objective
/// above is returned exactly, not a rescaled variant's.
pub fn fit_influences(
    target_id: &str,
    target_series: &TimeSeries,
    p: f64,
    neighbors: &[RegressionNeighbor<'_>],
    window: SlotRange,
    ridge_lambda: f64,
) -> Result<Vec<f64>> {
    let active: Vec<usize> = (0..neighbors.len())
        .filter(|&i| neighbors[i].weight != 0.0)
        .collect();
    let mut influences = vec![0.0_f64; neighbors.len()];
    if active.is_empty() {
        return Ok(influences);
    }

    // Usable slots: target and all active neighbors present.
    let slots: Vec<usize> = window
        .iter()
        .filter(|&t| {
            target_series.get(t).is_some()
                && active.iter().all(|&i| neighbors[i].series.get(t).is_some())
        })
        .collect();
    if slots.is_empty() {
        return Err(Error::NoUsableSlots {
            target: target_id.to_string(),
        });
    }

    let rows = slots.len();
    let cols = active.len();
    let mut x = vec![vec![0.0_f64; cols]; rows];
    let mut y = vec![0.0_f64; rows];
    for (r, &t) in slots.iter().enumerate() {
        y[r] = p * target_series.get(t).expect("slot filtered as present");
        for (c, &i) in active.iter().enumerate() {
            let n = &neighbors[i];
            x[r][c] = n.weight * n.series.get(t).expect("slot filtered as present");
        }
    }

    // Column RMS scaling. All-zero columns stay out of the system (their
    // best coefficient is 0 for any positive ridge; at lambda = 0 any value
    // fits, and 0 is the minimum-norm choice).
    let mut scale = vec![0.0_f64; cols];
    for c in 0..cols {
        let ss: f64 = (0..rows).map(|r| x[r][c] * x[r][c]).sum();
        scale[c] = (ss / rows as f64).sqrt();
    }
    let kept: Vec<usize> = (0..cols).filter(|&c| scale[c] > 0.0).collect();
    if kept.is_empty() {
        return Ok(influences);
    }

    let k = kept.len();
    let mut a = vec![vec![0.0_f64; k]; k];
    let mut b = vec![0.0_f64; k];
    for (ci, &c1) in kept.iter().enumerate() {
        for (cj, &c2) in kept.iter().enumerate().skip(ci) {
            let mut dot = 0.0;
            for row in x.iter().take(rows) {
                dot += (row[c1] / scale[c1]) * (row[c2] / scale[c2]);
            }
            a[ci][cj] = dot;
            a[cj][ci] = dot;
        }
        a[ci][ci] += ridge_lambda / (scale[c1] * scale[c1]);
        let mut dot = 0.0;
        for r in 0..rows {
            dot += (x[r][c1] / scale[c1]) * y[r];
        }
        b[ci] = dot;
    }

    let beta = cholesky_solve(&mut a, &b).ok_or_else(|| Error::SingularSystem {
        target: target_id.to_string(),
    })?;
    for (ci, &c) in kept.iter().enumerate() {
        let alpha = beta[ci] / scale[c];
        influences[active[c]] = alpha * neighbors[active[c]].weight;
    }
    Ok(influences)
}

/// In-place Cholesky factorization and solve for a symmetric system.
/// Returns None when a pivot collapses, i.e. the system is singular at the
/// given ridge.
fn cholesky_solve(a: &mut [Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    // Breakdown threshold relative to the largest diagonal entry.
    let max_diag = (0..n).map(|i| a[i][i].abs()).fold(0.0_f64, f64::max);
    let tiny = max_diag * 1e-13;

    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i][j];
            s -= a[i][..j]
                .iter()
                .zip(&a[j][..j])
                .map(|(x, y)| x * y)
                .sum::<f64>();
            if i == j {
                if s <= tiny || !s.is_finite() {
                    return None;
                }
                a[i][i] = s.sqrt();
            } else {
                a[i][j] = s / a[j][j];
            }
        }
    }
    // Forward then back substitution.
    let mut z = vec![0.0_f64; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i][k] * z[k];
        }
        z[i] = s / a[i][i];
    }
    let mut out = vec![0.0_f64; n];
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in i + 1..n {
            s -= a[k][i] * out[k];
        }
        out[i] = s / a[i][i];
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(values: &[f64]) -> TimeSeries {
        TimeSeries::from_values(values.to_vec()).unwrap()
    }

    fn window(len: usize) -> SlotRange {
        SlotRange::new(0, len).unwrap()
    }

    #[test]
    fn single_neighbor_closed_form_recovery() {
        // Neighbor series is exactly (p / I_true) * target, so the fitted
        // influence must come back as I_true.
        let p = 0.25;
        let i_true = 0.04;
        let target = series(&[10.0, 40.0, 25.0, 60.0, 15.0, 33.0]);
        let nbr_vals: Vec<f64> = (0..6)
            .map(|t| (p / i_true) * target.get(t).unwrap())
            .collect();
        let nbr = series(&nbr_vals);
        let fitted = fit_influences(
            "t",
            &target,
            p,
            &[RegressionNeighbor { id: "n", weight: 0.7, series: &nbr }],
            window(6),
            1e-10,
        )
        .unwrap();
        assert!((fitted[0] - i_true).abs() < 1e-8, "{}", fitted[0]);
    }

    #[test]
    fn exact_two_neighbor_recovery() {
        let s1 = series(&[30.0, 70.0, 20.0, 90.0, 40.0, 60.0, 80.0, 10.0]);
        let s2 = series(&[5.0, 1.0, 8.0, 2.0, 7.0, 3.0, 4.0, 6.0]);
        let p = 0.1;
        let (i1, i2) = (0.03, -0.011);
        let tv: Vec<f64> = (0..8)
            .map(|t| (i1 * s1.get(t).unwrap() + i2 * s2.get(t).unwrap()) / p)
            .collect();
        let target = series(&tv);
        let fitted = fit_influences(
            "t",
            &target,
            p,
            &[
                RegressionNeighbor { id: "a", weight: 0.9, series: &s1 },
                RegressionNeighbor { id: "b", weight: 1.7, series: &s2 },
            ],
            window(8),
            1e-12,
        )
        .unwrap();
        assert!((fitted[0] - i1).abs() < 1e-9);
        assert!((fitted[1] - i2).abs() < 1e-9);
    }

    #[test]
    fn matches_brute_force_normal_equations() {
        // Noisy target: compare against a direct Gaussian-elimination solve
        // of (X^T X + lambda I) alpha = X^T y without any rescaling.
        let lambda = 1e-3;
        let p = 0.2;
        let n1 = series(&[12.0, 5.0, 9.0, 14.0, 3.0, 8.0, 11.0, 6.0, 10.0, 7.0]);
        let n2 = series(&[2.0, 9.0, 4.0, 1.0, 8.0, 5.0, 3.0, 7.0, 6.0, 2.5]);
        let n3 = series(&[7.0, 7.5, 6.0, 8.0, 9.0, 5.5, 6.5, 7.2, 8.5, 6.8]);
        let noise = [0.3, -0.2, 0.5, -0.4, 0.1, 0.0, -0.3, 0.2, -0.1, 0.4];
        let tv: Vec<f64> = (0..10)
            .map(|t| {
                (0.5 * n1.get(t).unwrap() + 1.2 * n2.get(t).unwrap()
                    - 0.2 * n3.get(t).unwrap()
                    + noise[t])
                    .max(0.0)
            })
            .collect();
        let target = series(&tv);
        let weights = [0.8, 1.5, 0.6];
        let nbrs = [
            RegressionNeighbor { id: "a", weight: weights[0], series: &n1 },
            RegressionNeighbor { id: "b", weight: weights[1], series: &n2 },
            RegressionNeighbor { id: "c", weight: weights[2], series: &n3 },
        ];
        let fitted = fit_influences("t", &target, p, &nbrs, window(10), lambda).unwrap();

        // Oracle: dense normal equations, Gaussian elimination with partial
        // pivoting, no scaling.
        let cols: Vec<Vec<f64>> = nbrs
            .iter()
            .map(|n| (0..10).map(|t| n.weight * n.series.get(t).unwrap()).collect())
            .collect();
        let y: Vec<f64> = (0..10).map(|t| p * target.get(t).unwrap()).collect();
        let mut m = [[0.0_f64; 4]; 3];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b).sum();
            }
            m[i][i] += lambda;
            m[i][3] = cols[i].iter().zip(&y).map(|(a, b)| a * b).sum();
        }
        for c in 0..3 {
            let pivot = (c..3).max_by(|&r1, &r2| m[r1][c].abs().total_cmp(&m[r2][c].abs())).unwrap();
            m.swap(c, pivot);
            for r in 0..3 {
                if r != c {
                    let f = m[r][c] / m[c][c];
                    let pivot_row = m[c];
                    for (k, v) in m[r].iter_mut().enumerate().skip(c) {
                        *v -= f * pivot_row[k];
                    }
                }
            }
        }
        for i in 0..3 {
            let alpha = m[i][3] / m[i][i];
            let expected = alpha * weights[i];
            assert!(
                (fitted[i] - expected).abs() <= 1e-10 * expected.abs().max(1.0),
                "col {i}: {} vs {expected}",
                fitted[i]
            );
        }
    }

    #[test]
    fn zero_target_with_positive_ridge_gives_zero_influences() {
        let target = series(&[0.0, 0.0, 0.0, 0.0]);
        let n1 = series(&[1.0, 2.0, 3.0, 4.0]);
        let fitted = fit_influences(
            "t",
            &target,
            0.5,
            &[RegressionNeighbor { id: "a", weight: 1.0, series: &n1 }],
            window(4),
            1e-3,
        )
        .unwrap();
        assert_eq!(fitted, vec![0.0]);
    }

    #[test]
    fn collinear_columns_at_zero_ridge_error_mentions_ridge() {
        let n1 = series(&[1.0, 2.0, 3.0, 4.0]);
        let n2 = series(&[2.0, 4.0, 6.0, 8.0]);
        let target = series(&[1.0, 2.0, 3.0, 4.0]);
        let err = fit_influences(
            "t",
            &target,
            1.0,
            &[
                RegressionNeighbor { id: "a", weight: 1.0, series: &n1 },
                RegressionNeighbor { id: "b", weight: 1.0, series: &n2 },
            ],
            window(4),
            0.0,
        )
        .unwrap_err();
        assert!(err.to_string().contains("ridge_lambda"), "{err}");
    }

    #[test]
    fn absent_slots_are_skipped_not_zeroed() {
        // Slot 2 is absent for the neighbor; with it skipped the system is
        // exactly determined by the remaining slots.
        let mut nbr = TimeSeries::absent(4);
        nbr.set(0, 2.0).unwrap();
        nbr.set(1, 5.0).unwrap();
        nbr.set(3, 3.0).unwrap();
        let target = series(&[4.0, 10.0, 999.0, 6.0]);
        let fitted = fit_influences(
            "t",
            &target,
            0.5,
            &[RegressionNeighbor { id: "a", weight: 2.0, series: &nbr }],
            window(4),
            1e-12,
        )
        .unwrap();
        // p * target = 0.5 * (2 * nbr) so alpha * W = 1.0 exactly.
        assert!((fitted[0] - 1.0).abs() < 1e-10, "{}", fitted[0]);
    }

    #[test]
    fn no_usable_slots_is_an_error() {
        let nbr = TimeSeries::absent(3);
        let target = series(&[1.0, 2.0, 3.0]);
        assert!(matches!(
            fit_influences(
                "t",
                &target,
                1.0,
                &[RegressionNeighbor { id: "a", weight: 1.0, series: &nbr }],
                window(3),
                1e-3,
            ),
            Err(Error::NoUsableSlots { .. })
        ));
    }

    #[test]
    fn zero_weight_neighbors_never_enter_the_system() {
        let n1 = series(&[1.0, 2.0, 3.0, 4.0]);
        let n2 = series(&[9.0, 9.0, 9.0, 9.0]);
        let target = series(&[2.0, 4.0, 6.0, 8.0]);
        let fitted = fit_influences(
            "t",
            &target,
            1.0,
            &[
                RegressionNeighbor { id: "a", weight: 0.0, series: &n1 },
                RegressionNeighbor { id: "b", weight: 3.0, series: &n2 },
            ],
            window(4),
            1e-9,
        )
        .unwrap();
        assert_eq!(fitted[0], 0.0);
        assert!(fitted[1] > 0.0);
    }
}
