//! Chi-square test of independence between radius and angle.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

pub const MIN_POLAR_SAMPLE: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolarVerdict {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub reject: bool,
    /// `table[r][z]`: count of points in radius bin `r` and angle bin `z`.
    pub table: Vec<Vec<usize>>,
    pub row_sums: Vec<usize>,
    pub col_sums: Vec<usize>,
}

/// Bin index of each value, by rank, into `bins` cells of (near) equal count.
fn rank_bins(values: &[f64], bins: usize) -> Vec<usize> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]).then(i.cmp(&j)));
    let mut out = vec![0; n];
    for (rank, &i) in order.iter().enumerate() {
        out[i] = rank * bins / n;
    }
    out
}

/// Tests whether `rho = |x|` and `zeta = atan2(x_2, x_1)` are independent.
///
/// Each coordinate is cut at its empirical quantiles into `bins` cells and
/// Pearson's statistic is referred to chi-square with `(bins - 1)^2` degrees
/// of freedom. Independence is rejected when the p-value is below
/// `significance`.
pub fn polar_independence_test(sample: &[Vec<f64>], bins: usize, significance: f64) -> Result<PolarVerdict> {
    if sample.len() < MIN_POLAR_SAMPLE {
        return Err(Error::InsufficientData(format!(
            "polar test needs at least {MIN_POLAR_SAMPLE} points, got {}",
            sample.len()
        )));
    }
    if bins < 2 {
        return Err(Error::invalid("bins", "must be >= 2"));
    }
    if !(significance > 0.0 && significance < 1.0) {
        return Err(Error::invalid("significance", "must lie in (0, 1)"));
    }
    let mut rho = Vec::with_capacity(sample.len());
    let mut zeta = Vec::with_capacity(sample.len());
    for (m, x) in sample.iter().enumerate() {
        if x.len() != 2 {
            return Err(Error::invalid(format!("sample[{m}]"), format!("expected 2 coordinates, got {}", x.len())));
        }
        if !(x[0].is_finite() && x[1].is_finite()) {
            return Err(Error::invalid(format!("sample[{m}]"), "must be finite"));
        }
        rho.push(x[0].hypot(x[1]));
        zeta.push(x[1].atan2(x[0]));
    }
    let rb = rank_bins(&rho, bins);
    let zb = rank_bins(&zeta, bins);
    let mut table = vec![vec![0usize; bins]; bins];
    for (&r, &z) in rb.iter().zip(&zb) {
        table[r][z] += 1;
    }
    let row_sums: Vec<usize> = table.iter().map(|row| row.iter().sum()).collect();
    let col_sums: Vec<usize> = (0..bins).map(|z| table.iter().map(|row| row[z]).sum()).collect();
    let n = sample.len() as f64;
    let mut statistic = 0.0;
    for (r, row) in table.iter().enumerate() {
        for (z, &obs) in row.iter().enumerate() {
            let expected = row_sums[r] as f64 * col_sums[z] as f64 / n;
            statistic += (obs as f64 - expected).powi(2) / expected;
        }
    }
    let dof = (bins - 1) * (bins - 1);
    let chi = ChiSquared::new(dof as f64).map_err(|e| Error::Numerical(e.to_string()))?;
    let p_value = chi.sf(statistic);
    Ok(PolarVerdict {
        statistic,
        dof,
        p_value,
        reject: p_value < significance,
        table,
        row_sums,
        col_sums,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_bins_equal_counts() {
        let v: Vec<f64> = (0..12).rev().map(f64::from).collect();
        let b = rank_bins(&v, 3);
        assert_eq!(b, vec![2, 2, 2, 2, 1, 1, 1, 1, 0, 0, 0, 0]);
    }

    #[test]
    fn margins_match_bin_counts() {
        let sample: Vec<Vec<f64>> = (0..1200)
            .map(|i| {
                let t = i as f64 * 0.618_033_988_749_895;
                vec![(t * 7.0).sin() * (1.0 + (i % 13) as f64), (t * 3.0).cos() * (1.0 + (i % 7) as f64)]
            })
            .collect();
        let v = polar_independence_test(&sample, 6, 0.01).unwrap();
        assert!(v.row_sums.iter().all(|&s| s == 200));
        assert!(v.col_sums.iter().all(|&s| s == 200));
        assert_eq!(v.dof, 25);
    }

    #[test]
    fn small_samples_are_rejected() {
        let sample = vec![vec![1.0, 0.0]; 999];
        assert!(matches!(polar_independence_test(&sample, 4, 0.01), Err(Error::InsufficientData(_))));
    }
}
