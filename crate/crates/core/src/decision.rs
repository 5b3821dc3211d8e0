//! Multi-hypothesis decision rules.
//!
//! Hypothesis `H_k` says the observation has density `f_k` with respect to
//! Lebesgue measure on `R^d`. A rule assigns every point a probability
//! vector `phi(x)` over labels `0..=N`; deterministic rules put all mass on
//! one label. With misclassification weights `v[i][k]` (cost of deciding
//! `H_i` when `H_k` holds) the risk of a rule is
//!
//! ```text
//! Z = sum_{i,k} v[i][k] alpha[i][k],   alpha[i][k] = ∫ phi_i f_k dx
//!   = sum_j ∫ phi_j(x) g_j(x) dx,      g_j(x) = sum_k v[k][j] f_k(x)
//! ```
//!
//! and it is minimized by labelling each point with `argmin_j g_j(x)`
//! ([`optimal_rule`]), giving `Z* = ∫ min_j g_j dx`.
//!
//! Hypotheses may carry point masses. Those are handled by adding counting
//! measure at each atom location to the dominating measure: at an atom the
//! "density" of `H_k` is the mass it places there, and the optimal rule
//! minimizes the cost built from those masses.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_ur;

use crate::density::MixtureModel;
use crate::error::{Error, Result};
use crate::quadrature::{anchored_pieces, gauss_kronrod_anchored, grading_for, gauss_kronrod_monitored, AnchoredPiece, Tolerance, VecEstimate};
use crate::seed;

/// Misclassification weights `v[i][k]` with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    v: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightDoc {
    v: Vec<Vec<f64>>,
}

impl WeightMatrix {
    pub fn new(v: Vec<Vec<f64>>) -> Result<Self> {
        let n = v.len();
        if n < 2 {
            return Err(Error::invalid("v", format!("need at least 2 hypotheses, got {n}")));
        }
        let mut nontrivial = false;
        for (i, row) in v.iter().enumerate() {
            if row.len() != n {
                return Err(Error::invalid(format!("v[{i}]"), format!("expected {n} entries, got {}", row.len())));
            }
            for (k, &w) in row.iter().enumerate() {
                if !(w.is_finite() && w >= 0.0) {
                    return Err(Error::invalid(format!("v[{i}][{k}]"), format!("must be finite and >= 0, got {w}")));
                }
                if i == k && w != 0.0 {
                    return Err(Error::invalid(format!("v[{i}][{i}]"), "diagonal weights must be 0"));
                }
                nontrivial |= w > 0.0;
            }
        }
        if !nontrivial {
            return Err(Error::invalid("v", "at least one off-diagonal weight must be > 0"));
        }
        Ok(WeightMatrix { v })
    }

    /// Unit weight on every error: `Z` is the sum of all error probabilities.
    pub fn unit(n_hypotheses: usize) -> Result<Self> {
        Self::new(
            (0..n_hypotheses)
                .map(|i| (0..n_hypotheses).map(|k| if i == k { 0.0 } else { 1.0 }).collect())
                .collect(),
        )
    }

    pub fn n_hypotheses(&self) -> usize {
        self.v.len()
    }

    /// Weight of deciding `H_i` when `H_k` is true.
    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.v[i][k]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.v
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::domain(format!("scale factor must be > 0, got {c}")));
        }
        Self::new(self.v.iter().map(|row| row.iter().map(|w| w * c).collect()).collect())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: WeightDoc = serde_json::from_str(text).map_err(|e| Error::invalid("$", e.to_string()))?;
        Self::new(doc.v)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&WeightDoc { v: self.v.clone() }).expect("weights serialize")
    }
}

/// Densities `f_0 .. f_N` of a common dimension.
#[derive(Debug, Clone)]
pub struct HypothesisFamily {
    densities: Vec<MixtureModel>,
    dim: usize,
}

impl HypothesisFamily {
    pub fn new<M: Into<MixtureModel>>(densities: Vec<M>) -> Result<Self> {
        let densities: Vec<MixtureModel> = densities.into_iter().map(Into::into).collect();
        if densities.len() < 2 {
            return Err(Error::invalid("densities", "need at least 2 hypotheses"));
        }
        let dim = densities[0].dim();
        for (k, d) in densities.iter().enumerate() {
            if d.dim() != dim {
                return Err(Error::invalid(format!("densities[{k}]"), format!("dimension {} differs from {dim}", d.dim())));
            }
        }
        Ok(HypothesisFamily { densities, dim })
    }

    pub fn len(&self) -> usize {
        self.densities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.densities.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn densities(&self) -> &[MixtureModel] {
        &self.densities
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Continuous densities `f_k(x)` for all hypotheses.
    pub fn pdfs(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        Ok(self.pdfs_unchecked(x))
    }

    fn pdfs_unchecked(&self, x: &[f64]) -> Vec<f64> {
        self.densities.iter().map(|d| d.pdf_unchecked(x)).collect()
    }

    /// Continuous densities at `base + off`, offsets kept exact.
    fn pdfs_anchored(&self, base: &[f64], off: &[f64]) -> Vec<f64> {
        self.densities.iter().map(|d| d.pdf_anchored(base, off)).collect()
    }

    /// Point masses at `x`, if `x` is the atom location of any hypothesis.
    pub fn atom_masses(&self, x: &[f64]) -> Option<Vec<f64>> {
        if !self.densities.iter().any(|d| d.is_atom(x)) {
            return None;
        }
        Some(self.densities.iter().map(|d| if d.is_atom(x) { d.atom_weight() } else { 0.0 }).collect())
    }

    /// Distinct atom locations across hypotheses.
    pub fn atom_locations(&self) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = Vec::new();
        for d in &self.densities {
            if let Some(atom) = d.atom() {
                if !out.iter().any(|p| p.iter().zip(&atom.location).all(|(a, b)| a.to_bits() == b.to_bits())) {
                    out.push(atom.location.clone());
                }
            }
        }
        out
    }
}

fn check_sizes(weights: &WeightMatrix, family: &HypothesisFamily) -> Result<()> {
    if weights.n_hypotheses() != family.len() {
        return Err(Error::DimensionMismatch {
            expected: family.len(),
            got: weights.n_hypotheses(),
        });
    }
    Ok(())
}

fn blend(weights: &WeightMatrix, f: &[f64]) -> Vec<f64> {
    let n = f.len();
    (0..n)
        .map(|i| (0..n).map(|k| if weights.v[k][i] == 0.0 { 0.0 } else { weights.v[k][i] * f[k] }).sum())
        .collect()
}

/// `g_i(x) = sum_k v[k][i] f_k(x)`, the expected cost density of deciding
/// `H_i` at `x`. Note the transposed index.
pub fn cost_density(weights: &WeightMatrix, family: &HypothesisFamily, i: usize, x: &[f64]) -> Result<f64> {
    check_sizes(weights, family)?;
    if i >= family.len() {
        return Err(Error::LabelOutOfRange {
            label: i,
            n_labels: family.len(),
        });
    }
    let f = family.pdfs(x)?;
    Ok((0..f.len()).map(|k| if weights.v[k][i] == 0.0 { 0.0 } else { weights.v[k][i] * f[k] }).sum())
}

/// All cost densities `g_0(x) .. g_N(x)`.
pub fn cost_densities(weights: &WeightMatrix, family: &HypothesisFamily, x: &[f64]) -> Result<Vec<f64>> {
    check_sizes(weights, family)?;
    Ok(blend(weights, &family.pdfs(x)?))
}

/// Index of the smallest entry; the lowest index wins ties.
pub fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = j;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleKind {
    Deterministic,
    Randomized,
}

type LabelFn = dyn Fn(&[f64]) -> usize + Send + Sync;
type PhiFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

#[derive(Clone)]
enum RuleFn {
    Label(Arc<LabelFn>),
    Phi(Arc<PhiFn>),
}

/// A decision rule over labels `0..n_labels`.
#[derive(Clone)]
pub struct DecisionRule {
    n_labels: usize,
    inner: RuleFn,
}

impl std::fmt::Debug for DecisionRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DecisionRule")
            .field("n_labels", &self.n_labels)
            .field("kind", &self.kind())
            .finish()
    }
}

impl DecisionRule {
    pub fn deterministic<F>(n_labels: usize, classify: F) -> Self
    where
        F: Fn(&[f64]) -> usize + Send + Sync + 'static,
    {
        DecisionRule {
            n_labels,
            inner: RuleFn::Label(Arc::new(classify)),
        }
    }

    pub fn randomized<F>(n_labels: usize, phi: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        DecisionRule {
            n_labels,
            inner: RuleFn::Phi(Arc::new(phi)),
        }
    }

    /// Always decide `label`.
    pub fn constant(n_labels: usize, label: usize) -> Self {
        Self::deterministic(n_labels, move |_| label)
    }

    pub fn n_labels(&self) -> usize {
        self.n_labels
    }

    pub fn kind(&self) -> RuleKind {
        match self.inner {
            RuleFn::Label(_) => RuleKind::Deterministic,
            RuleFn::Phi(_) => RuleKind::Randomized,
        }
    }

    /// Decision probabilities at `x`. A deterministic rule that returns an
    /// out-of-range label yields the zero vector, which fails completeness.
    pub fn phi(&self, x: &[f64]) -> Vec<f64> {
        match &self.inner {
            RuleFn::Label(f) => {
                let mut v = vec![0.0; self.n_labels];
                if let Some(slot) = v.get_mut(f(x)) {
                    *slot = 1.0;
                }
                v
            }
            RuleFn::Phi(f) => f(x),
        }
    }

    /// The label chosen at `x`, or `None` if `phi(x)` is not a unit vector.
    pub fn classify(&self, x: &[f64]) -> Option<usize> {
        match &self.inner {
            RuleFn::Label(f) => Some(f(x)).filter(|&l| l < self.n_labels),
            RuleFn::Phi(f) => {
                let phi = f(x);
                let j = phi.iter().position(|&p| p == 1.0)?;
                (phi.len() == self.n_labels && phi.iter().enumerate().all(|(i, &p)| i == j || p == 0.0)).then_some(j)
            }
        }
    }
}

/// The risk-minimizing deterministic rule: `argmin_j g_j(x)`, lowest label
/// on ties. At atom locations the costs are built from point masses.
pub fn optimal_rule(weights: &WeightMatrix, family: &HypothesisFamily) -> Result<DecisionRule> {
    check_sizes(weights, family)?;
    let weights = weights.clone();
    let family = family.clone();
    let dim = family.dim();
    let n = family.len();
    Ok(DecisionRule::deterministic(n, move |x| {
        if x.len() != dim {
            return n;
        }
        if let Some(masses) = family.atom_masses(x) {
            return argmin(&blend(&weights, &masses));
        }
        argmin(&blend(&weights, &family.pdfs_unchecked(x)))
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ViolationKind {
    Completeness,
    Unambiguity,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub probe: usize,
    pub kind: ViolationKind,
    pub phi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub checked: usize,
    pub violation: Option<Violation>,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        self.violation.is_none()
    }
}

/// Tolerance on `sum_j phi_j(x) = 1`.
pub const COMPLETENESS_TOL: f64 = 1e-12;

fn check_phi(phi: &[f64], n_labels: usize) -> Option<ViolationKind> {
    let sum: f64 = phi.iter().sum();
    if phi.len() != n_labels || phi.iter().any(|p| !(0.0..=1.0).contains(p)) || (sum - 1.0).abs() > COMPLETENESS_TOL {
        return Some(ViolationKind::Completeness);
    }
    if phi.iter().filter(|&&p| p != 0.0).count() > 1 {
        return Some(ViolationKind::Unambiguity);
    }
    None
}

/// Checks completeness and unambiguity at every probe; reports the first
/// failure.
pub fn validate_rule(rule: &DecisionRule, probes: &[Vec<f64>]) -> Verdict {
    for (probe, x) in probes.iter().enumerate() {
        let phi = rule.phi(x);
        if let Some(kind) = check_phi(&phi, rule.n_labels()) {
            return Verdict {
                checked: probe + 1,
                violation: Some(Violation { probe, kind, phi }),
            };
        }
    }
    Verdict {
        checked: probes.len(),
        violation: None,
    }
}

fn violation_error(kind: ViolationKind, x: &[f64], phi: &[f64]) -> Error {
    Error::RuleViolation(format!("{kind:?} violated at {x:?}: phi = {phi:?}"))
}

/// `alpha[i][k]`: probability of deciding `H_i` when `H_k` holds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorMatrix {
    pub alpha: Vec<Vec<f64>>,
    pub standard_errors: Vec<Vec<f64>>,
}

impl ErrorMatrix {
    pub fn column_sums(&self) -> Vec<f64> {
        let n = self.alpha.len();
        (0..n).map(|k| (0..n).map(|i| self.alpha[i][k]).sum()).collect()
    }

    /// Flat `i,k,alpha,stderr` table.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,k,alpha,stderr\n");
        for (i, row) in self.alpha.iter().enumerate() {
            for (k, a) in row.iter().enumerate() {
                out.push_str(&format!("{i},{k},{a},{}\n", self.standard_errors[i][k]));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskReport {
    /// Weighted risk `sum v[i][k] alpha[i][k]`.
    pub z: f64,
    /// Standard error of `z` (0 for quadrature).
    pub z_stderr: f64,
    /// False alarm: leaving the normal state `H_0` when it holds.
    pub q_fa: f64,
    /// Non-detection: deciding `H_0` when another hypothesis holds.
    pub q_nd: f64,
    pub error_matrix: ErrorMatrix,
    /// Estimated integration error (quadrature only).
    pub quadrature_error: f64,
    /// Upper bound on probability mass outside the integration box.
    pub truncation_bound: f64,
}

impl RiskReport {
    fn from_alpha(weights: &WeightMatrix, alpha: Vec<Vec<f64>>, standard_errors: Vec<Vec<f64>>) -> Self {
        let n = alpha.len();
        let mut z = 0.0;
        for (i, row) in alpha.iter().enumerate() {
            for (k, a) in row.iter().enumerate() {
                z += weights.get(i, k) * a;
            }
        }
        let q_fa = (1..n).map(|j| alpha[j][0]).sum();
        let q_nd = (1..n).map(|j| alpha[0][j]).sum();
        RiskReport {
            z,
            z_stderr: 0.0,
            q_fa,
            q_nd,
            error_matrix: ErrorMatrix { alpha, standard_errors },
            quadrature_error: 0.0,
            truncation_bound: 0.0,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn to_csv(&self) -> String {
        self.error_matrix.to_csv()
    }
}

/// Controls for tensor-grid quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub tolerance: Tolerance,
    /// Minimum half-width of the integration box, in quasi-standards,
    /// beyond every quasi-center.
    pub tail_sigmas: f64,
    /// The box is widened until each one-sided marginal tail holds less
    /// than this mass.
    pub tail_mass: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            tolerance: Tolerance {
                abs: 1e-11,
                rel: 1e-11,
                max_intervals: 4000,
            },
            tail_sigmas: 10.0,
            tail_mass: 1e-16,
        }
    }
}

impl QuadratureSpec {
    /// A looser setting that keeps 2-D and 3-D integrals affordable. The
    /// nested integrals rarely reach the requested tolerance; the reported
    /// `quadrature_error` is then an upper estimate, typically an order of
    /// magnitude above the true error.
    pub fn coarse() -> Self {
        QuadratureSpec {
            tolerance: Tolerance {
                abs: 1e-8,
                rel: 1e-8,
                max_intervals: 200,
            },
            ..Self::default()
        }
    }
}

/// Tail mass of one side of a quasi-Gaussian marginal beyond distance `t`.
fn side_tail(alpha: f64, sigma: f64, t: f64) -> f64 {
    let x = 0.5 * (t / sigma).powi(2);
    gamma_ur(0.5 * (alpha + 1.0), x)
}

fn side_extent(alpha: f64, sigma: f64, spec: &QuadratureSpec) -> f64 {
    let mut t = spec.tail_sigmas * sigma;
    while side_tail(alpha, sigma, t) > spec.tail_mass {
        t += sigma;
    }
    t
}

struct IntegrationBox {
    breaks: Vec<Vec<f64>>,
    /// Grading exponents below and above each break.
    gradings: Vec<Vec<(i32, i32)>>,
    truncation: f64,
}

fn integration_box(family: &HypothesisFamily, spec: &QuadratureSpec) -> IntegrationBox {
    let d = family.dim();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    let mut centers: Vec<Vec<(f64, f64, f64)>> = vec![Vec::new(); d];
    for model in family.densities() {
        for comp in model.components() {
            for (j, m) in comp.marginals().iter().enumerate() {
                lo[j] = lo[j].min(m.a() - side_extent(m.alpha_neg(), m.sigma(), spec));
                hi[j] = hi[j].max(m.a() + side_extent(m.alpha_pos(), m.sigma(), spec));
                centers[j].push((m.a(), m.alpha_neg(), m.alpha_pos()));
            }
        }
    }
    let mut truncation: f64 = 0.0;
    for model in family.densities() {
        let mut mass = 0.0;
        for (w, comp) in model.weights().iter().zip(model.components()) {
            for (j, m) in comp.marginals().iter().enumerate() {
                let p = m.negative_mass();
                mass += w * (p * side_tail(m.alpha_neg(), m.sigma(), m.a() - lo[j])
                    + (1.0 - p) * side_tail(m.alpha_pos(), m.sigma(), hi[j] - m.a()));
            }
        }
        truncation = truncation.max(mass);
    }
    let mut breaks = Vec::with_capacity(d);
    let mut gradings = Vec::with_capacity(d);
    for j in 0..d {
        let mut b = vec![lo[j], hi[j]];
        b.extend(centers[j].iter().map(|c| c.0).filter(|&c| c > lo[j] && c < hi[j]));
        b.sort_by(f64::total_cmp);
        b.dedup();
        let g = b
            .iter()
            .map(|&x| {
                let (neg, pos) = centers[j]
                    .iter()
                    .filter(|c| c.0 == x)
                    .fold((f64::INFINITY, f64::INFINITY), |(n, p), c| (n.min(c.1), p.min(c.2)));
                (grading_for(neg), grading_for(pos))
            })
            .collect();
        breaks.push(b);
        gradings.push(g);
    }
    IntegrationBox { breaks, gradings, truncation }
}

/// Iterated adaptive integration of a vector integrand over a tensor box.
///
/// Each coordinate reaches the integrand as an anchor (a break) plus an
/// offset, so densities singular at a break are evaluated at exact offsets.
fn tensor_integrate<F>(breaks: &[Vec<f64>], gradings: &[Vec<(i32, i32)>], out_dim: usize, tol: Tolerance, f: &mut F) -> VecEstimate
where
    F: FnMut(&[f64], &[f64]) -> Vec<f64>,
{
    let d = breaks.len();
    let pieces: Vec<Vec<AnchoredPiece>> = breaks.iter().zip(gradings).map(|(b, g)| anchored_pieces(b, g)).collect();
    let mut base = vec![0.0; d];
    let mut off = vec![0.0; d];
    // Inner integrals are scaled so their accumulated error stays within tol.
    let widths: Vec<f64> = breaks.iter().map(|b| b[b.len() - 1] - b[0]).collect();
    integrate_level(0, &pieces, &widths, out_dim, tol, &mut base, &mut off, f)
}

#[allow(clippy::too_many_arguments)]
fn integrate_level<F>(
    level: usize,
    pieces: &[Vec<AnchoredPiece>],
    widths: &[f64],
    out_dim: usize,
    tol: Tolerance,
    base: &mut Vec<f64>,
    off: &mut Vec<f64>,
    f: &mut F,
) -> VecEstimate
where
    F: FnMut(&[f64], &[f64]) -> Vec<f64>,
{
    let last = level + 1 == pieces.len();
    if last {
        return gauss_kronrod_anchored(
            |anchor, t| {
                base[level] = anchor;
                off[level] = t;
                f(base, off)
            },
            out_dim,
            &pieces[level],
            tol,
        );
    }
    let inner_tol = Tolerance {
        abs: tol.abs / widths[level],
        ..tol
    };
    let mut evaluations = 0;
    let mut inner_converged = true;
    // The last entry carries the inner error estimate along; it is
    // integrated but does not steer refinement.
    let mut est = gauss_kronrod_monitored(
        |anchor, t| {
            base[level] = anchor;
            off[level] = t;
            let inner = integrate_level(level + 1, pieces, widths, out_dim, inner_tol, base, off, f);
            evaluations += inner.evaluations;
            inner_converged &= inner.converged;
            let mut v = inner.values;
            v.push(inner.error);
            v
        },
        out_dim + 1,
        out_dim,
        &pieces[level],
        tol,
    );
    let inner_error = est.values.pop().unwrap_or(0.0);
    est.error += inner_error;
    est.evaluations = evaluations;
    est.converged &= inner_converged;
    est
}

/// Risk, error matrix, false-alarm and non-detection probabilities of
/// `rule` by deterministic quadrature (`d <= 3`).
pub fn risk_quadrature(weights: &WeightMatrix, family: &HypothesisFamily, rule: &DecisionRule, spec: &QuadratureSpec) -> Result<RiskReport> {
    check_sizes(weights, family)?;
    let d = family.dim();
    if d > 3 {
        return Err(Error::DimensionTooLarge(d));
    }
    let n = family.len();
    if rule.n_labels() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: rule.n_labels(),
        });
    }
    let bx = integration_box(family, spec);
    let mut violation: Option<Error> = None;
    let mut x = vec![0.0; d];
    let mut integrand = |base: &[f64], off: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; n * n];
        let f = family.pdfs_anchored(base, off);
        for (xj, (b, o)) in x.iter_mut().zip(base.iter().zip(off)) {
            *xj = b + o;
        }
        let phi = rule.phi(&x);
        if violation.is_none() {
            if let Some(kind) = check_phi(&phi, n) {
                violation = Some(violation_error(kind, &x, &phi));
            }
        }
        for (i, &p) in phi.iter().enumerate().take(n) {
            if p != 0.0 {
                for (k, &fk) in f.iter().enumerate() {
                    out[i * n + k] = p * fk;
                }
            }
        }
        out
    };
    let est = tensor_integrate(&bx.breaks, &bx.gradings, n * n, spec.tolerance, &mut integrand);
    if let Some(err) = violation {
        return Err(err);
    }
    let mut alpha: Vec<Vec<f64>> = (0..n).map(|i| est.values[i * n..(i + 1) * n].to_vec()).collect();
    for loc in family.atom_locations() {
        let masses = family.atom_masses(&loc).expect("atom location");
        let phi = rule.phi(&loc);
        if let Some(kind) = check_phi(&phi, n) {
            return Err(violation_error(kind, &loc, &phi));
        }
        for i in 0..n {
            for k in 0..n {
                alpha[i][k] += phi[i] * masses[k];
            }
        }
    }
    let mut report = RiskReport::from_alpha(weights, alpha, vec![vec![0.0; n]; n]);
    report.quadrature_error = est.error;
    report.truncation_bound = bx.truncation;
    Ok(report)
}

/// `∫ min_j g_j(x) dx` (plus atom terms): the risk of the optimal rule,
/// computed without reference to any rule. Returns `(value, error)`.
pub fn minimal_risk(weights: &WeightMatrix, family: &HypothesisFamily, spec: &QuadratureSpec) -> Result<(f64, f64)> {
    check_sizes(weights, family)?;
    let d = family.dim();
    if d > 3 {
        return Err(Error::DimensionTooLarge(d));
    }
    let bx = integration_box(family, spec);
    let mut integrand = |base: &[f64], off: &[f64]| -> Vec<f64> {
        let g = blend(weights, &family.pdfs_anchored(base, off));
        vec![g.iter().copied().fold(f64::INFINITY, f64::min)]
    };
    let est = tensor_integrate(&bx.breaks, &bx.gradings, 1, spec.tolerance, &mut integrand);
    let mut value = est.values[0];
    for loc in family.atom_locations() {
        let g = blend(weights, &family.atom_masses(&loc).expect("atom location"));
        value += g.iter().copied().fold(f64::INFINITY, f64::min);
    }
    Ok((value, est.error))
}

/// Number of independently seeded work units per hypothesis.
pub const MONTE_CARLO_CHUNKS: usize = 16;

#[derive(Debug, Clone)]
struct ChunkStats {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    cost: f64,
    cost_sq: f64,
}

/// Monte Carlo estimate of the same quantities as [`risk_quadrature`].
///
/// Draws for hypothesis `k` are split into [`MONTE_CARLO_CHUNKS`] units;
/// unit `c` uses stream `(k << 32) | c` of `seed`. Units run in parallel and
/// are merged in a fixed order, so the result depends only on the seed.
pub fn risk_monte_carlo(
    weights: &WeightMatrix,
    family: &HypothesisFamily,
    rule: &DecisionRule,
    n_per_hypothesis: usize,
    seed: u64,
) -> Result<RiskReport> {
    check_sizes(weights, family)?;
    if n_per_hypothesis < 100 {
        return Err(Error::domain(format!("n_per_hypothesis must be >= 100, got {n_per_hypothesis}")));
    }
    let n = family.len();
    if rule.n_labels() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: rule.n_labels(),
        });
    }
    let units: Vec<(usize, usize)> = (0..n).flat_map(|k| (0..MONTE_CARLO_CHUNKS).map(move |c| (k, c))).collect();
    let stats: Vec<Result<ChunkStats>> = units
        .par_iter()
        .map(|&(k, c)| {
            let size = n_per_hypothesis / MONTE_CARLO_CHUNKS + usize::from(c < n_per_hypothesis % MONTE_CARLO_CHUNKS);
            let mut rng = seed::stream_rng(seed, ((k as u64) << 32) | c as u64);
            let mut s = ChunkStats {
                sum: vec![0.0; n],
                sum_sq: vec![0.0; n],
                cost: 0.0,
                cost_sq: 0.0,
            };
            for x in family.densities()[k].sample_with(size, &mut rng) {
                let phi = rule.phi(&x);
                if let Some(kind) = check_phi(&phi, n) {
                    return Err(violation_error(kind, &x, &phi));
                }
                let mut cost = 0.0;
                for (i, &p) in phi.iter().enumerate() {
                    s.sum[i] += p;
                    s.sum_sq[i] += p * p;
                    cost += weights.get(i, k) * p;
                }
                s.cost += cost;
                s.cost_sq += cost * cost;
            }
            Ok(s)
        })
        .collect();

    let m = n_per_hypothesis as f64;
    let mut alpha = vec![vec![0.0; n]; n];
    let mut se = vec![vec![0.0; n]; n];
    let mut z_var = 0.0;
    for k in 0..n {
        let mut sum = vec![0.0; n];
        let mut sum_sq = vec![0.0; n];
        let mut cost = 0.0;
        let mut cost_sq = 0.0;
        for c in 0..MONTE_CARLO_CHUNKS {
            let s = stats[k * MONTE_CARLO_CHUNKS + c].as_ref().map_err(Clone::clone)?;
            for i in 0..n {
                sum[i] += s.sum[i];
                sum_sq[i] += s.sum_sq[i];
            }
            cost += s.cost;
            cost_sq += s.cost_sq;
        }
        for i in 0..n {
            let mean = sum[i] / m;
            alpha[i][k] = mean;
            se[i][k] = ((sum_sq[i] / m - mean * mean).max(0.0) / m).sqrt();
        }
        let mean_cost = cost / m;
        z_var += (cost_sq / m - mean_cost * mean_cost).max(0.0) / m;
    }
    let mut report = RiskReport::from_alpha(weights, alpha, se);
    report.z_stderr = z_var.sqrt();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{Atom, ProductDensity, QuasiGaussian1D};

    fn gauss_pair() -> HypothesisFamily {
        HypothesisFamily::new(vec![
            QuasiGaussian1D::gaussian(0.0, 1.0).unwrap(),
            QuasiGaussian1D::gaussian(2.0, 1.0).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn weight_matrix_validation() {
        assert!(WeightMatrix::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).is_ok());
        assert!(WeightMatrix::new(vec![vec![0.0, 1.0], vec![1.0, 0.5]]).is_err());
        assert!(WeightMatrix::new(vec![vec![0.0, 0.0], vec![0.0, 0.0]]).is_err());
        assert!(WeightMatrix::new(vec![vec![0.0, -1.0], vec![1.0, 0.0]]).is_err());
        assert!(WeightMatrix::new(vec![vec![0.0]]).is_err());
        assert!(WeightMatrix::new(vec![vec![0.0, 1.0], vec![1.0]]).is_err());
        let w = WeightMatrix::from_json(r#"{"v": [[0, 2], [1, 0]]}"#).unwrap();
        assert_eq!(w.get(0, 1), 2.0);
        assert_eq!(WeightMatrix::from_json(&w.to_json()).unwrap(), w);
    }

    #[test]
    fn two_hypothesis_costs_swap() {
        let fam = gauss_pair();
        let w = WeightMatrix::unit(2).unwrap();
        for x in [-1.0, 0.3, 2.5] {
            let f = fam.pdfs(&[x]).unwrap();
            assert_eq!(cost_density(&w, &fam, 0, &[x]).unwrap(), f[1]);
            assert_eq!(cost_density(&w, &fam, 1, &[x]).unwrap(), f[0]);
        }
        assert!(matches!(cost_density(&w, &fam, 2, &[0.0]), Err(Error::LabelOutOfRange { .. })));
        assert!(matches!(cost_density(&w, &fam, 0, &[0.0, 1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn single_entry_weights() {
        let fam = HypothesisFamily::new(vec![
            QuasiGaussian1D::gaussian(0.0, 1.0).unwrap(),
            QuasiGaussian1D::gaussian(1.0, 1.0).unwrap(),
            QuasiGaussian1D::gaussian(2.0, 1.0).unwrap(),
        ])
        .unwrap();
        let mut v = vec![vec![0.0; 3]; 3];
        v[0][2] = 3.0;
        let w = WeightMatrix::new(v).unwrap();
        let x = [0.7];
        let f0 = fam.pdfs(&x).unwrap()[0];
        let g = cost_densities(&w, &fam, &x).unwrap();
        assert_eq!(g, vec![0.0, 0.0, 3.0 * f0]);
    }

    #[test]
    fn optimal_rule_boundary_and_ties() {
        let fam = gauss_pair();
        let w = WeightMatrix::unit(2).unwrap();
        let rule = optimal_rule(&w, &fam).unwrap();
        assert_eq!(rule.classify(&[0.99]), Some(0));
        assert_eq!(rule.classify(&[1.01]), Some(1));
        assert_eq!(rule.kind(), RuleKind::Deterministic);

        let same = HypothesisFamily::new(vec![
            QuasiGaussian1D::gaussian(0.0, 1.0).unwrap(),
            QuasiGaussian1D::gaussian(0.0, 1.0).unwrap(),
        ])
        .unwrap();
        let rule = optimal_rule(&w, &same).unwrap();
        for x in [-3.0, 0.0, 0.5, 4.0] {
            assert_eq!(rule.classify(&[x]), Some(0));
        }
    }

    #[test]
    fn validate_rule_reports_first_violation() {
        let ok = DecisionRule::constant(2, 1);
        assert!(validate_rule(&ok, &[vec![0.0], vec![1.0]]).passed());

        let ambiguous = DecisionRule::randomized(2, |x| if x[0] > 0.0 { vec![0.5, 0.5] } else { vec![1.0, 0.0] });
        let v = validate_rule(&ambiguous, &[vec![-1.0], vec![1.0], vec![2.0]]);
        let violation = v.violation.unwrap();
        assert_eq!(violation.kind, ViolationKind::Unambiguity);
        assert_eq!(violation.probe, 1);

        let incomplete = DecisionRule::randomized(2, |_| vec![0.7, 0.2]);
        let v = validate_rule(&incomplete, &[vec![0.0]]);
        assert_eq!(v.violation.unwrap().kind, ViolationKind::Completeness);

        let out_of_range = DecisionRule::deterministic(2, |_| 5);
        assert_eq!(
            validate_rule(&out_of_range, &[vec![0.0]]).violation.unwrap().kind,
            ViolationKind::Completeness
        );
    }

    #[test]
    fn monte_carlo_constant_rule_is_exact() {
        let fam = gauss_pair();
        let w = WeightMatrix::unit(2).unwrap();
        let r = risk_monte_carlo(&w, &fam, &DecisionRule::constant(2, 0), 1000, 1).unwrap();
        assert_eq!(r.error_matrix.alpha[0], vec![1.0, 1.0]);
        assert_eq!(r.error_matrix.alpha[1], vec![0.0, 0.0]);
        assert_eq!(r.q_fa, 0.0);
        assert_eq!(r.q_nd, 1.0);
        assert_eq!(r.z, 1.0);
    }

    #[test]
    fn monte_carlo_rejects_uniform_randomized_rule() {
        let fam = gauss_pair();
        let w = WeightMatrix::unit(2).unwrap();
        let rule = DecisionRule::randomized(2, |_| vec![0.5, 0.5]);
        assert!(matches!(risk_monte_carlo(&w, &fam, &rule, 1000, 1), Err(Error::RuleViolation(_))));
        assert!(matches!(
            risk_quadrature(&w, &fam, &rule, &QuadratureSpec::default()),
            Err(Error::RuleViolation(_))
        ));
        assert!(risk_monte_carlo(&w, &fam, &DecisionRule::constant(2, 0), 99, 1).is_err());
    }

    #[test]
    fn quadrature_rejects_high_dimension() {
        let p = ProductDensity::gaussian(&[0.0; 4], &[1.0; 4]).unwrap();
        let fam = HypothesisFamily::new(vec![p.clone(), p]).unwrap();
        let w = WeightMatrix::unit(2).unwrap();
        let rule = DecisionRule::constant(2, 0);
        assert!(matches!(
            risk_quadrature(&w, &fam, &rule, &QuadratureSpec::default()),
            Err(Error::DimensionTooLarge(4))
        ));
    }

    #[test]
    fn atoms_enter_the_error_matrix() {
        let c = ProductDensity::gaussian(&[0.0], &[1.0]).unwrap();
        let with_atom = MixtureModel::new(
            vec![0.75],
            vec![c],
            Some(Atom {
                weight: 0.25,
                location: vec![5.0],
            }),
        )
        .unwrap();
        let other = MixtureModel::from(QuasiGaussian1D::gaussian(5.0, 1.0).unwrap());
        let fam = HypothesisFamily::new(vec![with_atom, other]).unwrap();
        let w = WeightMatrix::unit(2).unwrap();
        let rule = optimal_rule(&w, &fam).unwrap();
        // At the atom H_0 carries positive mass and H_1 none, so label 0.
        assert_eq!(rule.classify(&[5.0]), Some(0));
        let r = risk_quadrature(&w, &fam, &rule, &QuadratureSpec::default()).unwrap();
        for s in r.error_matrix.column_sums() {
            assert!((s - 1.0).abs() < 1e-8, "{s}");
        }
        let (zmin, _) = minimal_risk(&w, &fam, &QuadratureSpec::default()).unwrap();
        assert!((r.z - zmin).abs() < 1e-8);
    }
}
