//! One EM run for a quasi-Gaussian product mixture.
//!
//! The E-step computes responsibilities. The M-step sets the weights in
//! closed form and updates each marginal by coordinate ascent on its
//! responsibility-weighted log-likelihood:
//!
//! * quasi-center `a`: coarse scan over `a +- 2 sigma` and golden-section
//!   refinement of the profile likelihood, in which every other parameter
//!   is re-fitted for each candidate;
//! * mass split: weighted fraction of points left of `a`;
//! * scale: `sigma^2 = S2 / (W_neg (alpha_neg + 1) + W_pos (alpha_pos + 1))`;
//! * each exponent: golden-section search of a concave function.
//!
//! Every coordinate move is kept only if it does not lower the objective,
//! and an iteration that lowers the total log-likelihood is rejected.

use rand::Rng;

use crate::density::{ln_half_moment_unchecked, log_sum_exp, QuasiGaussian1D};
use crate::seed;

/// Parameters of one marginal in the form the optimizer works with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Marginal {
    pub a: f64,
    pub alpha_neg: f64,
    pub alpha_pos: f64,
    pub sigma: f64,
    pub p_neg: f64,
}

impl Marginal {
    pub fn law(&self) -> QuasiGaussian1D {
        QuasiGaussian1D::from_mass_split(self.a, self.alpha_neg, self.alpha_pos, self.sigma, self.p_neg)
            .expect("optimizer keeps parameters in the valid domain")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct State {
    pub weights: Vec<f64>,
    pub comps: Vec<Vec<Marginal>>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Limits {
    pub alpha_lo: f64,
    pub alpha_hi: f64,
}

pub(crate) const ALPHA_LO: f64 = -0.9 + 1e-6;
pub(crate) const ALPHA_HI: f64 = 10.0;
pub(crate) const WEIGHT_FLOOR: f64 = 1e-10;
const RESPONSIBILITY_CUTOFF: f64 = 1e-9;

#[derive(Debug, Clone)]
pub(crate) struct AxisInfo {
    pub sigma_lo: f64,
    pub sigma_hi: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct RunOutcome {
    pub state: State,
    pub history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub clamps: usize,
}

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`.
pub(crate) fn golden_max<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a) > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Weighted sufficient statistics of one marginal about a candidate center.
#[derive(Debug, Clone, Copy, Default)]
struct SideStats {
    w_neg: f64,
    w_pos: f64,
    log_neg: f64,
    log_pos: f64,
    sq: f64,
    w_center: f64,
}

fn side_stats(xs: &[f64], ws: &[f64], a: f64) -> SideStats {
    let mut s = SideStats::default();
    for (&x, &w) in xs.iter().zip(ws) {
        let y = x - a;
        s.sq += w * y * y;
        if y < 0.0 {
            s.w_neg += w;
            s.log_neg += w * (-y).ln();
        } else if y > 0.0 {
            s.w_pos += w;
            s.log_pos += w * y.ln();
        } else {
            s.w_center += w;
        }
    }
    s
}

fn side_term(w: f64, log_sum: f64, alpha: f64, sigma: f64, mass: f64) -> f64 {
    if w == 0.0 {
        return 0.0;
    }
    if mass <= 0.0 {
        return f64::NEG_INFINITY;
    }
    w * mass.ln() + alpha * log_sum - w * ln_half_moment_unchecked(alpha, sigma)
}

/// `sum_m w_m ln p(x_m)` from the statistics. A weighted point sitting on the
/// fold makes the candidate inadmissible.
fn objective(s: &SideStats, m: &Marginal) -> f64 {
    if s.w_center > 0.0 {
        return f64::NEG_INFINITY;
    }
    side_term(s.w_neg, s.log_neg, m.alpha_neg, m.sigma, m.p_neg) + side_term(s.w_pos, s.log_pos, m.alpha_pos, m.sigma, 1.0 - m.p_neg)
        - s.sq / (2.0 * m.sigma * m.sigma)
}

fn split(s: &SideStats) -> f64 {
    let total = s.w_neg + s.w_pos;
    if total > 0.0 {
        s.w_neg / total
    } else {
        0.5
    }
}

#[derive(Debug, Clone, Copy)]
struct Effort {
    rounds: usize,
    alpha_tol: f64,
}

const FULL: Effort = Effort {
    rounds: 3,
    alpha_tol: 1e-7,
};
const PROBE: Effort = Effort {
    rounds: 2,
    alpha_tol: 1e-4,
};

/// Coordinate ascent on mass split, scale and exponents with the
/// statistics (hence the quasi-center) held fixed.
fn fit_shape(stats: &SideStats, start: Marginal, axis: &AxisInfo, limits: Limits, effort: Effort, clamps: &mut usize) -> (Marginal, f64) {
    let mut m = start;
    let mut best = objective(stats, &m);

    let cand = Marginal { p_neg: split(stats), ..m };
    let v = objective(stats, &cand);
    if v >= best {
        m = cand;
        best = v;
    }

    for _ in 0..effort.rounds {
        let denom = stats.w_neg * (m.alpha_neg + 1.0) + stats.w_pos * (m.alpha_pos + 1.0);
        if denom > 0.0 && stats.sq > 0.0 {
            let raw = (stats.sq / denom).sqrt();
            let sigma = raw.clamp(axis.sigma_lo, axis.sigma_hi);
            if sigma != raw {
                *clamps += 1;
            }
            let cand = Marginal { sigma, ..m };
            let v = objective(stats, &cand);
            if v >= best {
                m = cand;
                best = v;
            }
        }

        if stats.w_neg > 0.0 {
            let (alpha, _) = golden_max(
                |al| side_term(stats.w_neg, stats.log_neg, al, m.sigma, m.p_neg),
                limits.alpha_lo,
                limits.alpha_hi,
                effort.alpha_tol,
            );
            let cand = Marginal { alpha_neg: alpha, ..m };
            let v = objective(stats, &cand);
            if v >= best {
                m = cand;
                best = v;
            }
        }
        if stats.w_pos > 0.0 {
            let (alpha, _) = golden_max(
                |al| side_term(stats.w_pos, stats.log_pos, al, m.sigma, 1.0 - m.p_neg),
                limits.alpha_lo,
                limits.alpha_hi,
                effort.alpha_tol,
            );
            let cand = Marginal { alpha_pos: alpha, ..m };
            let v = objective(stats, &cand);
            if v >= best {
                m = cand;
                best = v;
            }
        }
    }
    (m, best)
}

/// How far the quasi-center search looks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Search {
    /// Coarse scan over `a +- 2 sigma`, then local refinement.
    Explore,
    /// Local refinement within `a +- sigma / 4` only.
    Refine,
    /// One probe between every pair of neighbouring observations within
    /// `a +- 2 sigma`, then refinement inside the best gap.
    Polish,
}

/// Grid of quasi-center offsets, in units of the scale, scanned before the
/// golden-section refinement.
const CENTER_SCAN: [f64; 17] = [
    -2.0, -1.75, -1.5, -1.25, -1.0, -0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0,
];

fn update_marginal(xs: &[f64], ws: &[f64], current: Marginal, axis: &AxisInfo, limits: Limits, search: Search, clamps: &mut usize) -> Marginal {
    let stats = side_stats(xs, ws, current.a);
    let (m, best) = fit_shape(&stats, current, axis, limits, FULL, clamps);

    // Quasi-center, with every other parameter profiled out.
    let mut scratch = 0;
    let mut profile = |a: f64, from: Marginal| {
        let s = side_stats(xs, ws, a);
        fit_shape(&s, Marginal { a, ..from }, axis, limits, PROBE, &mut scratch)
    };
    let sigma = m.sigma;
    let mut center = m.a;
    let mut center_val = best;
    let (lo, hi) = match search {
        Search::Explore => {
            for off in CENTER_SCAN {
                let a = m.a + off * sigma;
                let (_, v) = profile(a, m);
                if v > center_val {
                    center = a;
                    center_val = v;
                }
            }
            (center - 0.25 * sigma, center + 0.25 * sigma)
        }
        Search::Refine => (center - 0.25 * sigma, center + 0.25 * sigma),
        Search::Polish => {
            // The profile is smooth between consecutive observations, so
            // one probe per gap locates the best gap.
            let mut knots: Vec<f64> = xs.iter().copied().filter(|x| (x - m.a).abs() <= 2.0 * sigma).collect();
            knots.sort_by(f64::total_cmp);
            knots.dedup();
            let mut gap = (center - 0.25 * sigma, center + 0.25 * sigma);
            for pair in knots.windows(2) {
                let a = 0.5 * (pair[0] + pair[1]);
                let (_, v) = profile(a, m);
                if v > center_val {
                    center = a;
                    center_val = v;
                    gap = (pair[0], pair[1]);
                }
            }
            gap
        }
    };
    let (a_new, _) = golden_max(|a| profile(a, m).1, lo, hi, 1e-3 * (hi - lo));
    for a in [a_new, center] {
        let s = side_stats(xs, ws, a);
        let (cand, v) = fit_shape(&s, Marginal { a, ..m }, axis, limits, FULL, clamps);
        if v > best {
            return cand;
        }
    }
    m
}

/// Log-likelihood of `data` and, optionally, the responsibilities.
pub(crate) fn e_step(data: &[Vec<f64>], state: &State, resp: Option<&mut Vec<Vec<f64>>>) -> f64 {
    let laws: Vec<Vec<QuasiGaussian1D>> = state.comps.iter().map(|c| c.iter().map(Marginal::law).collect()).collect();
    let ln_w: Vec<f64> = state.weights.iter().map(|w| w.ln()).collect();
    let k = state.weights.len();
    let mut total = 0.0;
    let mut terms = vec![0.0; k];
    let mut resp = resp;
    for (m, x) in data.iter().enumerate() {
        for c in 0..k {
            let mut t = ln_w[c];
            for (law, &xi) in laws[c].iter().zip(x) {
                t += law.ln_pdf(xi);
                if t == f64::NEG_INFINITY {
                    break;
                }
            }
            terms[c] = t;
        }
        let mut sorted = terms.clone();
        let lse = log_sum_exp(&mut sorted);
        total += lse;
        if let Some(r) = resp.as_deref_mut() {
            let row = &mut r[m];
            if lse.is_finite() {
                for c in 0..k {
                    row[c] = (terms[c] - lse).exp();
                }
            } else {
                let hits = terms.iter().filter(|&&t| t == lse).count().max(1) as f64;
                for c in 0..k {
                    row[c] = if lse == f64::NEG_INFINITY || terms[c] == lse { 1.0 / hits } else { 0.0 };
                }
                if lse == f64::NEG_INFINITY {
                    row.iter_mut().for_each(|v| *v = 1.0 / k as f64);
                }
            }
        }
    }
    total
}

fn m_step(data: &[Vec<f64>], resp: &[Vec<f64>], state: &State, axes: &[AxisInfo], limits: Limits, search: Search, clamps: &mut usize) -> State {
    let k = state.weights.len();
    let n = data.len() as f64;
    let mut weights: Vec<f64> = (0..k).map(|c| resp.iter().map(|r| r[c]).sum::<f64>() / n).collect();
    for w in weights.iter_mut() {
        *w = w.max(WEIGHT_FLOOR);
    }
    let s: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= s);

    let mut comps = state.comps.clone();
    let mut xs = Vec::with_capacity(data.len());
    let mut ws = Vec::with_capacity(data.len());
    for c in 0..k {
        for (j, axis) in axes.iter().enumerate() {
            xs.clear();
            ws.clear();
            for (x, r) in data.iter().zip(resp) {
                if r[c] > RESPONSIBILITY_CUTOFF {
                    xs.push(x[j]);
                    ws.push(r[c]);
                }
            }
            if ws.is_empty() {
                continue;
            }
            comps[c][j] = update_marginal(&xs, &ws, comps[c][j], axis, limits, search, clamps);
        }
    }
    State { weights, comps }
}

pub(crate) fn run(data: &[Vec<f64>], init: State, axes: &[AxisInfo], search: Search, max_iterations: usize, tol: f64) -> RunOutcome {
    let limits = Limits {
        alpha_lo: ALPHA_LO,
        alpha_hi: ALPHA_HI,
    };
    let k = init.weights.len();
    let mut resp = vec![vec![0.0; k]; data.len()];
    let mut state = init;
    let mut ll = e_step(data, &state, Some(&mut resp));
    let mut history = vec![ll];
    let mut clamps = 0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iterations {
        let next = m_step(data, &resp, &state, axes, limits, search, &mut clamps);
        let mut next_resp = vec![vec![0.0; k]; data.len()];
        let next_ll = e_step(data, &next, Some(&mut next_resp));
        iterations += 1;
        if !(next_ll >= ll) {
            // Rejected: keep the previous iterate.
            converged = true;
            break;
        }
        let gain = next_ll - ll;
        state = next;
        resp = next_resp;
        ll = next_ll;
        history.push(ll);
        if gain <= tol * ll.abs().max(1.0) {
            converged = true;
            break;
        }
    }
    RunOutcome {
        state,
        history,
        iterations,
        converged,
        clamps,
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

fn initial_marginal(a: f64, sigma: f64) -> Marginal {
    Marginal {
        a,
        alpha_neg: 0.0,
        alpha_pos: 0.0,
        sigma,
        p_neg: 0.5,
    }
}

/// Quantile-spread start: component `k` is centered at the `(k + 1/2) / N`
/// marginal quantiles.
pub(crate) fn quantile_init(data: &[Vec<f64>], n_comp: usize, init_sigma: &[f64]) -> State {
    let d = init_sigma.len();
    let sorted: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            let mut v: Vec<f64> = data.iter().map(|x| x[j]).collect();
            v.sort_by(f64::total_cmp);
            v
        })
        .collect();
    let comps = (0..n_comp)
        .map(|k| {
            let q = (k as f64 + 0.5) / n_comp as f64;
            (0..d).map(|j| initial_marginal(quantile(&sorted[j], q), init_sigma[j])).collect()
        })
        .collect();
    State {
        weights: vec![1.0 / n_comp as f64; n_comp],
        comps,
    }
}

/// Randomized start: centers are data points, each drawn with probability
/// proportional to its standardized squared deviation from the centers
/// already chosen (i.e. to minus twice its log-likelihood under unit-scale
/// normal bumps at those centers). Points already well explained are
/// unlikely to seed another component.
pub(crate) fn seeded_init(data: &[Vec<f64>], n_comp: usize, init_sigma: &[f64], scale: &[f64], seed: u64, stream: u64) -> State {
    let mut rng = seed::stream_rng(seed, stream);
    let d = init_sigma.len();
    let n = data.len();
    let mut centers: Vec<Vec<f64>> = vec![data[rng.random_range(0..n)].clone()];
    let mut score: Vec<f64> = vec![f64::INFINITY; n];
    while centers.len() < n_comp {
        let last = centers.last().expect("non-empty");
        let mut total = 0.0;
        for (m, x) in data.iter().enumerate() {
            let dev: f64 = (0..d).map(|j| ((x[j] - last[j]) / scale[j]).powi(2)).sum();
            score[m] = score[m].min(dev);
            total += score[m];
        }
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut idx = n - 1;
            for (m, &s) in score.iter().enumerate() {
                if target < s {
                    idx = m;
                    break;
                }
                target -= s;
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        centers.push(data[pick].clone());
    }
    let comps = centers
        .iter()
        .map(|c| (0..d).map(|j| initial_marginal(c[j], init_sigma[j])).collect())
        .collect();
    State {
        weights: vec![1.0 / n_comp as f64; n_comp],
        comps,
    }
}
