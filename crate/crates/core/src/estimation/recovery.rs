//! Repeated fits on fresh samples from a known model.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use super::{child_seed, fit, free_parameter_count, FitConfig, OBSERVATIONS_PER_PARAMETER};
use crate::density::MixtureModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryRow {
    pub n: usize,
    pub trial: usize,
    pub n_hat: usize,
    /// `sqrt(n) * |theta_hat - theta_0|`, present when `n_hat` matches the truth.
    pub sqrt_n_dev: Option<f64>,
    /// Largest distance between a recovered center and its matched true center.
    pub max_center_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryTable {
    pub n_true: usize,
    pub rows: Vec<RecoveryRow>,
}

impl RecoveryTable {
    /// Fraction of trials at sample size `n` with `n_hat = n_true`.
    pub fn frequency(&self, n: usize) -> f64 {
        let (hits, total) = self.rows.iter().filter(|r| r.n == n).fold((0, 0), |(h, t), r| {
            (h + usize::from(r.n_hat == self.n_true), t + 1)
        });
        if total == 0 {
            f64::NAN
        } else {
            hits as f64 / total as f64
        }
    }

    pub fn hits(&self, n: usize) -> usize {
        self.rows.iter().filter(|r| r.n == n && r.n_hat == self.n_true).count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,trial,n_hat,sqrt_n_dev\n");
        for r in &self.rows {
            let dev = r.sqrt_n_dev.map_or("NaN".to_string(), |v| format!("{v}"));
            let _ = writeln!(out, "{},{},{},{}", r.n, r.trial, r.n_hat, dev);
        }
        out
    }
}

/// Permutation `perm` minimizing `sum_k |center(fitted[perm[k]]) - center(truth[k])|^2`.
///
/// Exhaustive over permutations, so intended for small component counts.
pub fn match_components(truth: &MixtureModel, fitted: &MixtureModel) -> Result<Vec<usize>> {
    let n = truth.n_components();
    if fitted.n_components() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: fitted.n_components(),
        });
    }
    if n > 8 {
        return Err(Error::domain("label matching supports at most 8 components"));
    }
    let cost: Vec<Vec<f64>> = truth
        .components()
        .iter()
        .map(|t| {
            fitted
                .components()
                .iter()
                .map(|f| {
                    t.marginals()
                        .iter()
                        .zip(f.marginals())
                        .map(|(a, b)| (a.a() - b.a()).powi(2))
                        .sum()
                })
                .collect()
        })
        .collect();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = (f64::INFINITY, perm.clone());
    permute(&mut perm, 0, &cost, &mut best);
    Ok(best.1)
}

fn permute(perm: &mut Vec<usize>, k: usize, cost: &[Vec<f64>], best: &mut (f64, Vec<usize>)) {
    if k == perm.len() {
        let total: f64 = perm.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
        if total < best.0 {
            *best = (total, perm.clone());
        }
        return;
    }
    for i in k..perm.len() {
        perm.swap(k, i);
        permute(perm, k + 1, cost, best);
        perm.swap(k, i);
    }
}

/// Weights, then per component: centers, exponents (negative then positive
/// per axis), quasi-standards, negative-mass fractions.
pub fn canonical_parameters(model: &MixtureModel, order: &[usize]) -> Vec<f64> {
    let mut v: Vec<f64> = order.iter().map(|&k| model.weights()[k]).collect();
    for &k in order {
        let m = model.components()[k].marginals();
        v.extend(m.iter().map(|q| q.a()));
        for q in m {
            v.push(q.alpha_neg());
            v.push(q.alpha_pos());
        }
        v.extend(m.iter().map(|q| q.sigma()));
        v.extend(m.iter().map(|q| q.negative_mass()));
    }
    v
}

/// Runs `trials` independent sample-and-fit rounds for each size in `n_grid`.
///
/// When a sample is too small for `config.n_max`, the candidate range is
/// capped at the largest count the sample supports.
pub fn recovery_experiment(
    true_model: &MixtureModel,
    n_grid: &[usize],
    trials: usize,
    seed: u64,
    config: &FitConfig,
) -> Result<RecoveryTable> {
    config.validate()?;
    let n_true = true_model.n_components();
    let d = true_model.dim();
    let truth_order: Vec<usize> = (0..n_true).collect();
    let theta0 = canonical_parameters(true_model, &truth_order);

    let jobs: Vec<(usize, usize, usize)> = n_grid
        .iter()
        .flat_map(|&n| (0..trials).map(move |t| (n, t)))
        .enumerate()
        .map(|(idx, (n, t))| (idx, n, t))
        .collect();

    let rows = jobs
        .par_iter()
        .map(|&(idx, n, trial)| -> Result<RecoveryRow> {
            let sample = true_model.sample(n, child_seed(seed, 2 * idx as u64));
            let mut cfg = config.clone();
            cfg.seed = child_seed(seed, 2 * idx as u64 + 1);
            while cfg.n_max > cfg.n_min && n < OBSERVATIONS_PER_PARAMETER * free_parameter_count(cfg.n_max, d, false) {
                cfg.n_max -= 1;
            }
            let result = fit(&sample, &cfg)?;
            let (sqrt_n_dev, max_center_error) = if result.n_selected == n_true && result.model.n_components() == n_true {
                let order = match_components(true_model, &result.model)?;
                let theta = canonical_parameters(&result.model, &order);
                let dev = theta.iter().zip(&theta0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                let center_err = order
                    .iter()
                    .enumerate()
                    .map(|(i, &j)| {
                        true_model.components()[i]
                            .marginals()
                            .iter()
                            .zip(result.model.components()[j].marginals())
                            .map(|(a, b)| (a.a() - b.a()).powi(2))
                            .sum::<f64>()
                            .sqrt()
                    })
                    .fold(0.0, f64::max);
                (Some((n as f64).sqrt() * dev), Some(center_err))
            } else {
                (None, None)
            };
            Ok(RecoveryRow {
                n,
                trial,
                n_hat: result.n_selected,
                sqrt_n_dev,
                max_center_error,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RecoveryTable { n_true, rows })
}
