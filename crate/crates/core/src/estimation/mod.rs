//! Maximum-likelihood fitting of quasi-Gaussian mixtures.
//!
//! [`fit`] runs EM for every candidate component count, keeps the best of
//! several starts per count, and picks the count with the highest
//! penalized score `log L - (p / 2) ln n`, where `p` is the number of free
//! parameters. Each marginal has five: quasi-center, two exponents,
//! quasi-standard and mass split (the coefficients follow from the
//! normalization identity).
//!
//! Every start runs a short EM burst; only the best one continues to
//! convergence, followed by a few fine scans of each quasi-center.
//!
//! Point masses are identifiable only through exact repeats: with atom
//! detection on, the most frequent exactly repeated observation becomes the
//! atom and its frequency the atom weight.

mod em;
pub mod polar;
pub mod recovery;

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::density::{log_sum_exp, Atom, MixtureModel, ProductDensity};
use crate::error::{Error, Result};
use crate::seed;

pub use polar::{polar_independence_test, PolarVerdict};
pub use recovery::{match_components, recovery_experiment, RecoveryRow, RecoveryTable};

/// Free parameters per marginal.
pub const PARAMS_PER_MARGINAL: usize = 5;

/// EM iterations every start gets before the best one is run to convergence.
pub const SHORT_RUN_ITERATIONS: usize = 10;

/// Fine quasi-center scans attempted after EM converges.
pub const POLISH_ROUNDS: usize = 3;

/// Minimum number of observations per free parameter.
pub const OBSERVATIONS_PER_PARAMETER: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitConfig {
    pub n_min: usize,
    pub n_max: usize,
    pub max_iterations: usize,
    /// Stop when one iteration gains less than `tol * |log L|`.
    pub log_lik_tolerance: f64,
    pub restarts: usize,
    pub seed: u64,
    pub atom_detection: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            n_min: 1,
            n_max: 5,
            max_iterations: 200,
            log_lik_tolerance: 1e-8,
            restarts: 8,
            seed: 0,
            atom_detection: true,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_min < 1 {
            return Err(Error::invalid("n_min", "must be >= 1"));
        }
        if self.n_max < self.n_min {
            return Err(Error::invalid("n_max", "must be >= n_min"));
        }
        if !(self.log_lik_tolerance.is_finite() && self.log_lik_tolerance > 0.0) {
            return Err(Error::invalid("log_lik_tolerance", "must be > 0"));
        }
        if self.restarts < 1 {
            return Err(Error::invalid("restarts", "must be >= 1"));
        }
        if self.max_iterations < 1 {
            return Err(Error::invalid("max_iterations", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateScore {
    pub n_components: usize,
    pub log_likelihood: f64,
    pub penalty: f64,
    pub score: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: MixtureModel,
    pub log_likelihood: f64,
    pub n_selected: usize,
    pub per_candidate_scores: Vec<CandidateScore>,
    pub converged: bool,
    pub iterations_used: usize,
    /// Log-likelihood after each accepted EM iteration of the winning run.
    pub history: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Free parameters of an `n_components` mixture in dimension `dim`.
pub fn free_parameter_count(n_components: usize, dim: usize, atom: bool) -> usize {
    let continuous = n_components * PARAMS_PER_MARGINAL * dim + n_components.saturating_sub(1);
    continuous + if atom { dim + 1 } else { 0 }
}

fn check_data(data: &[Vec<f64>]) -> Result<usize> {
    let Some(first) = data.first() else {
        return Err(Error::InsufficientData("no observations".into()));
    };
    let d = first.len();
    if d == 0 {
        return Err(Error::invalid("data[0]", "observations need at least one coordinate"));
    }
    for (m, x) in data.iter().enumerate() {
        if x.len() != d {
            return Err(Error::invalid(format!("data[{m}]"), format!("expected {d} coordinates, got {}", x.len())));
        }
        if let Some(j) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("data[{m}][{j}]"), "must be finite"));
        }
    }
    Ok(d)
}

/// `sum_m ln G(eta_m)`. Observations equal (bitwise) to the atom location
/// contribute `ln W_0`; all others contribute the log of the continuous
/// density. `-inf` if any observation has zero likelihood.
pub fn log_likelihood(model: &MixtureModel, data: &[Vec<f64>]) -> Result<f64> {
    let mut total = 0.0;
    let ln_w: Vec<f64> = model.weights().iter().map(|w| w.ln()).collect();
    let mut terms = vec![0.0; ln_w.len()];
    for x in data {
        if x.len() != model.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                got: x.len(),
            });
        }
        if model.is_atom(x) {
            total += model.atom_weight().ln();
            continue;
        }
        for (t, (lw, c)) in terms.iter_mut().zip(ln_w.iter().zip(model.components())) {
            *t = lw + c.ln_pdf_unchecked(x);
        }
        total += log_sum_exp(&mut terms);
    }
    Ok(total)
}

fn bits(x: &[f64]) -> Vec<u64> {
    x.iter().map(|v| v.to_bits()).collect()
}

/// Most frequent exactly repeated observation and its count (first
/// occurrence wins ties).
fn most_frequent(data: &[Vec<f64>]) -> (usize, usize) {
    let mut counts: HashMap<Vec<u64>, (usize, usize)> = HashMap::new();
    for (m, x) in data.iter().enumerate() {
        counts.entry(bits(x)).or_insert((0, m)).0 += 1;
    }
    let mut best = (0, usize::MAX);
    for &(count, first) in counts.values() {
        if count > best.0 || (count == best.0 && first < best.1) {
            best = (count, first);
        }
    }
    (best.1, best.0)
}

fn std_dev(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    (values.map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

struct CandidateFit {
    outcome: em::RunOutcome,
}

/// Fits a quasi-Gaussian mixture and selects the number of components.
pub fn fit(data: &[Vec<f64>], config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    let d = check_data(data)?;
    let n = data.len();

    let mut warnings = Vec::new();
    let mut atom: Option<Atom> = None;
    let (idx, count) = most_frequent(data);
    if count == n {
        if config.atom_detection {
            let model = MixtureModel::atom_only(data[idx].clone())?;
            let ll = log_likelihood(&model, data)?;
            return Ok(FitResult {
                model,
                log_likelihood: ll,
                n_selected: 0,
                per_candidate_scores: Vec::new(),
                converged: true,
                iterations_used: 0,
                history: vec![ll],
                warnings,
            });
        }
        return Err(Error::DegenerateData("all observations are identical".into()));
    }
    if config.atom_detection && count >= 2 {
        atom = Some(Atom {
            weight: count as f64 / n as f64,
            location: data[idx].clone(),
        });
    }

    let needed = OBSERVATIONS_PER_PARAMETER * free_parameter_count(config.n_max, d, atom.is_some());
    if n < needed {
        return Err(Error::InsufficientData(format!(
            "{n} observations for {} candidate components in {d} dimensions; need at least {needed}",
            config.n_max
        )));
    }

    let atom_bits = atom.as_ref().map(|a| bits(&a.location));
    let continuous: Vec<Vec<f64>> = data
        .iter()
        .filter(|x| atom_bits.as_ref().is_none_or(|b| &bits(x) != b))
        .cloned()
        .collect();
    if continuous.len() < 2 * config.n_max {
        return Err(Error::InsufficientData(format!(
            "only {} observations outside the atom",
            continuous.len()
        )));
    }

    let mut axes = Vec::with_capacity(d);
    let mut scale = Vec::with_capacity(d);
    for j in 0..d {
        let mut s = std_dev(continuous.iter().map(|x| x[j]));
        if !(s > 0.0) {
            warnings.push(format!("axis {j} has zero spread; using unit scale"));
            s = 1.0;
        }
        scale.push(s);
        axes.push(em::AxisInfo {
            sigma_lo: 1e-3 * s,
            sigma_hi: 10.0 * s,
        });
    }

    let mut scores = Vec::new();
    let mut best: Option<(f64, usize, CandidateFit, MixtureModel, f64)> = None;
    for n_comp in config.n_min..=config.n_max {
        let init_sigma: Vec<f64> = scale.iter().map(|s| s / n_comp as f64).collect();
        let short = SHORT_RUN_ITERATIONS.min(config.max_iterations);
        let runs: Vec<em::RunOutcome> = (0..config.restarts)
            .into_par_iter()
            .map(|r| {
                let init = if r == 0 {
                    em::quantile_init(&continuous, n_comp, &init_sigma)
                } else {
                    let stream = ((n_comp as u64) << 32) | r as u64;
                    em::seeded_init(&continuous, n_comp, &init_sigma, &scale, config.seed, stream)
                };
                em::run(&continuous, init, &axes, em::Search::Explore, short, config.log_lik_tolerance)
            })
            .collect();
        // Best log-likelihood; the lowest restart index wins ties.
        let mut chosen = 0;
        for (r, run) in runs.iter().enumerate() {
            if run.history.last() > runs[chosen].history.last() {
                chosen = r;
            }
        }
        let mut outcome = runs.into_iter().nth(chosen).expect("restarts >= 1");
        if !outcome.converged {
            extend(&mut outcome, &continuous, &axes, em::Search::Refine, config);
        }
        for _ in 0..POLISH_ROUNDS {
            let before = outcome.iterations;
            extend(&mut outcome, &continuous, &axes, em::Search::Polish, config);
            let polished = outcome.iterations > before && outcome.history.len() > 1;
            if !polished {
                break;
            }
            extend(&mut outcome, &continuous, &axes, em::Search::Refine, config);
        }
        if outcome.clamps > 0 {
            warnings.push(format!("N = {n_comp}: quasi-standard clamped {} times", outcome.clamps));
        }
        let model = assemble(&outcome.state, atom.clone())?;
        let ll = log_likelihood(&model, data)?;
        let p = free_parameter_count(n_comp, d, atom.is_some());
        let penalty = 0.5 * p as f64 * (n as f64).ln();
        let score = ll - penalty;
        scores.push(CandidateScore {
            n_components: n_comp,
            log_likelihood: ll,
            penalty,
            score,
            converged: outcome.converged,
            iterations: outcome.iterations,
        });
        let better = match &best {
            None => true,
            Some((s, ..)) => score > *s,
        };
        if better {
            best = Some((score, n_comp, CandidateFit { outcome }, model, ll));
        }
    }
    let (_, n_selected, winner, model, log_likelihood) = best.ok_or_else(|| Error::Numerical("no candidate produced a model".into()))?;
    if !log_likelihood.is_finite() {
        return Err(Error::Numerical("fitted model has non-finite log-likelihood".into()));
    }
    Ok(FitResult {
        model,
        log_likelihood,
        n_selected,
        per_candidate_scores: scores,
        converged: winner.outcome.converged,
        iterations_used: winner.outcome.iterations,
        history: winner.outcome.history,
        warnings,
    })
}

/// Continues `outcome` with the given search; polishing takes one step and
/// keeps it only if it gains more than the convergence tolerance.
fn extend(outcome: &mut em::RunOutcome, data: &[Vec<f64>], axes: &[em::AxisInfo], search: em::Search, config: &FitConfig) {
    let budget = config.max_iterations.saturating_sub(outcome.iterations);
    if budget == 0 {
        return;
    }
    let steps = if search == em::Search::Polish { 1 } else { budget };
    let rest = em::run(data, outcome.state.clone(), axes, search, steps, config.log_lik_tolerance);
    let start = rest.history[0];
    let end = *rest.history.last().expect("history starts with the initial value");
    if search == em::Search::Polish && end - start <= config.log_lik_tolerance * end.abs().max(1.0) {
        return;
    }
    outcome.history.extend_from_slice(&rest.history[1..]);
    outcome.iterations += rest.iterations;
    outcome.converged = rest.converged;
    outcome.clamps += rest.clamps;
    outcome.state = rest.state;
}

fn assemble(state: &em::State, atom: Option<Atom>) -> Result<MixtureModel> {
    let continuous_mass = 1.0 - atom.as_ref().map_or(0.0, |a| a.weight);
    let components = state
        .comps
        .iter()
        .map(|c| ProductDensity::new(c.iter().map(em::Marginal::law).collect()))
        .collect::<Result<Vec<_>>>()?;
    let mut weights: Vec<f64> = state.weights.iter().map(|w| w * continuous_mass).collect();
    // Absorb rounding so the weights sum to one with the atom.
    let total: f64 = weights.iter().sum::<f64>() + (1.0 - continuous_mass);
    if let Some(last) = weights.last_mut() {
        *last += 1.0 - total;
    }
    MixtureModel::new(weights, components, atom)
}

/// Seed used for the `index`-th independent fit of an experiment.
pub(crate) fn child_seed(seed: u64, index: u64) -> u64 {
    seed::subseed(seed, index)
}
