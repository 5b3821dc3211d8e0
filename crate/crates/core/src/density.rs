//! Quasi-Gaussian laws.
//!
//! A one-dimensional quasi-Gaussian law `QN(a, alpha, sigma, C1, C2)` has
//! density
//!
//! ```text
//! p(x) = w(x - a) * exp(-(x - a)^2 / (2 sigma^2)) / (sigma sqrt(2 pi))
//! w(y) = C1 |y|^alpha_neg  for y < 0
//!        C2  y ^alpha_pos  for y > 0
//! ```
//!
//! with `alpha_neg, alpha_pos > -1` and the normalization constraint
//! `C1 I(alpha_neg, sigma) + C2 I(alpha_pos, sigma) = sigma sqrt(2 pi)`,
//! where `I` is the [`half_moment`]. The constraint leaves one free degree
//! of freedom once exponents and scale are fixed: the probability mass
//! that falls left of the quasi-center `a`.
//!
//! Products of such marginals give d-dimensional laws, and weighted sums of
//! products (optionally with a point mass) give [`MixtureModel`]s.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::seed;
use crate::special::ln_gamma;

pub const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

/// Relative tolerance on the normalization identity when a law is built
/// from explicit coefficients.
pub const NORMALIZATION_RTOL: f64 = 1e-10;

/// Tolerance on `atom_weight + sum(weights) = 1`.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// `ln I(alpha, sigma)` without domain checks.
pub(crate) fn ln_half_moment_unchecked(alpha: f64, sigma: f64) -> f64 {
    0.5 * (alpha - 1.0) * std::f64::consts::LN_2 + (alpha + 1.0) * sigma.ln() + ln_gamma(0.5 * (alpha + 1.0))
}

/// `I(alpha, sigma) = ∫_0^∞ x^alpha exp(-x^2 / (2 sigma^2)) dx
///                  = 2^((alpha - 1)/2) sigma^(alpha + 1) Γ((alpha + 1)/2)`.
pub fn half_moment(alpha: f64, sigma: f64) -> Result<f64> {
    check_exponent(alpha, "alpha")?;
    check_sigma(sigma)?;
    let value = ln_half_moment_unchecked(alpha, sigma).exp();
    if !(value.is_finite() && value > 0.0) {
        return Err(Error::domain(format!("half moment overflows for alpha = {alpha}, sigma = {sigma}")));
    }
    Ok(value)
}

fn check_exponent(alpha: f64, name: &str) -> Result<()> {
    if alpha.is_finite() && alpha > -1.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be finite and > -1, got {alpha}")))
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma.is_finite() && sigma > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid("sigma", format!("must be finite and > 0, got {sigma}")))
    }
}

/// Coefficients `(c_neg, c_pos)` satisfying the normalization identity
/// with `negative_mass_fraction` of the probability left of the center.
pub fn solve_normalization(alpha_neg: f64, alpha_pos: f64, sigma: f64, negative_mass_fraction: f64) -> Result<(f64, f64)> {
    check_exponent(alpha_neg, "alpha_neg")?;
    check_exponent(alpha_pos, "alpha_pos")?;
    check_sigma(sigma)?;
    let p = negative_mass_fraction;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid("negative_mass_fraction", format!("must lie in [0, 1], got {p}")));
    }
    let total = sigma * SQRT_2PI;
    let c_neg = if p == 0.0 { 0.0 } else { p * total / half_moment(alpha_neg, sigma)? };
    let c_pos = if p == 1.0 { 0.0 } else { (1.0 - p) * total / half_moment(alpha_pos, sigma)? };
    Ok((c_neg, c_pos))
}

/// One-dimensional quasi-Gaussian law. Immutable; the normalization identity
/// is checked on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct QuasiGaussian1D {
    a: f64,
    alpha_neg: f64,
    alpha_pos: f64,
    sigma: f64,
    c_neg: f64,
    c_pos: f64,
}

impl QuasiGaussian1D {
    /// Builds a law from explicit coefficients. Field names in errors match
    /// the JSON model document.
    pub fn new(a: f64, alpha_neg: f64, alpha_pos: f64, sigma: f64, c_neg: f64, c_pos: f64) -> Result<Self> {
        if !a.is_finite() {
            return Err(Error::invalid("a", format!("must be finite, got {a}")));
        }
        check_exponent(alpha_neg, "alpha_neg")?;
        check_exponent(alpha_pos, "alpha_pos")?;
        check_sigma(sigma)?;
        for (name, c) in [("c_neg", c_neg), ("c_pos", c_pos)] {
            if !(c.is_finite() && c >= 0.0) {
                return Err(Error::invalid(name, format!("must be finite and >= 0, got {c}")));
            }
        }
        if c_neg + c_pos <= 0.0 {
            return Err(Error::invalid("c_neg", "c_neg + c_pos must be > 0"));
        }
        let total = c_neg * half_moment(alpha_neg, sigma)? + c_pos * half_moment(alpha_pos, sigma)?;
        let want = sigma * SQRT_2PI;
        if ((total - want) / want).abs() > NORMALIZATION_RTOL {
            return Err(Error::invalid(
                "c_pos",
                format!("normalization violated: c_neg*I(alpha_neg) + c_pos*I(alpha_pos) = {total}, expected sigma*sqrt(2pi) = {want}"),
            ));
        }
        Ok(QuasiGaussian1D {
            a,
            alpha_neg,
            alpha_pos,
            sigma,
            c_neg,
            c_pos,
        })
    }

    /// Builds a law from its mass split; the coefficients come from
    /// [`solve_normalization`].
    pub fn from_mass_split(a: f64, alpha_neg: f64, alpha_pos: f64, sigma: f64, negative_mass_fraction: f64) -> Result<Self> {
        let (c_neg, c_pos) = solve_normalization(alpha_neg, alpha_pos, sigma, negative_mass_fraction)?;
        Self::new(a, alpha_neg, alpha_pos, sigma, c_neg, c_pos)
    }

    /// The normal law `N(mean, sigma^2)`: exponents zero, unit coefficients.
    pub fn gaussian(mean: f64, sigma: f64) -> Result<Self> {
        Self::new(mean, 0.0, 0.0, sigma, 1.0, 1.0)
    }

    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn alpha_neg(&self) -> f64 {
        self.alpha_neg
    }
    pub fn alpha_pos(&self) -> f64 {
        self.alpha_pos
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn c_neg(&self) -> f64 {
        self.c_neg
    }
    pub fn c_pos(&self) -> f64 {
        self.c_pos
    }

    /// `P(X < a)`.
    pub fn negative_mass(&self) -> f64 {
        if self.c_neg == 0.0 {
            return 0.0;
        }
        let hm = ln_half_moment_unchecked(self.alpha_neg, self.sigma).exp();
        (self.c_neg * hm / (self.sigma * SQRT_2PI)).min(1.0)
    }

    /// Density at displacement `y = x - a` from the quasi-center.
    ///
    /// At `y = 0` the weight function vanishes, but the density is set to
    /// its limit so that the Gaussian case stays continuous:
    /// `+inf` if a side with positive coefficient has a negative exponent,
    /// otherwise `0` if either exponent is positive, otherwise the mean of
    /// the two one-sided limits.
    pub fn pdf_at_offset(&self, y: f64) -> f64 {
        let (c, alpha) = if y < 0.0 {
            (self.c_neg, self.alpha_neg)
        } else if y > 0.0 {
            (self.c_pos, self.alpha_pos)
        } else {
            return self.pdf_at_center();
        };
        if c == 0.0 {
            return 0.0;
        }
        // A single exponential, so no factor underflows on its own.
        let quad = -0.5 * (y / self.sigma).powi(2);
        let e = if alpha == 0.0 { quad } else { alpha.mul_add(y.abs().ln(), quad) };
        let norm = self.sigma * SQRT_2PI;
        if e > -700.0 {
            c * e.exp() / norm
        } else {
            (c.ln() + e - norm.ln()).exp()
        }
    }

    fn pdf_at_center(&self) -> f64 {
        let singular = (self.c_neg > 0.0 && self.alpha_neg < 0.0) || (self.c_pos > 0.0 && self.alpha_pos < 0.0);
        if singular {
            f64::INFINITY
        } else if self.alpha_neg > 0.0 || self.alpha_pos > 0.0 {
            0.0
        } else {
            0.5 * (self.c_neg + self.c_pos) / (self.sigma * SQRT_2PI)
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.pdf_at_offset(x - self.a)
    }

    /// Natural log of [`pdf`](Self::pdf); `-inf` where the density is zero.
    pub fn ln_pdf(&self, x: f64) -> f64 {
        let y = x - self.a;
        let quad = -0.5 * (y / self.sigma).powi(2) - (self.sigma * SQRT_2PI).ln();
        if y < 0.0 {
            if self.c_neg == 0.0 {
                f64::NEG_INFINITY
            } else {
                self.c_neg.ln() + self.alpha_neg * (-y).ln() + quad
            }
        } else if y > 0.0 {
            if self.c_pos == 0.0 {
                f64::NEG_INFINITY
            } else {
                self.c_pos.ln() + self.alpha_pos * y.ln() + quad
            }
        } else {
            self.pdf_at_center().ln()
        }
    }

    fn sampler(&self) -> MarginalSampler {
        MarginalSampler {
            a: self.a,
            sigma: self.sigma,
            negative_mass: self.negative_mass(),
            neg: Gamma::new(0.5 * (self.alpha_neg + 1.0), 1.0).expect("shape > 0"),
            pos: Gamma::new(0.5 * (self.alpha_pos + 1.0), 1.0).expect("shape > 0"),
        }
    }

    /// One draw. The side is chosen by the mass split and the magnitude is
    /// `sigma * sqrt(2 T)` with `T ~ Gamma((alpha + 1) / 2, 1)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sampler().draw(rng)
    }
}

struct MarginalSampler {
    a: f64,
    sigma: f64,
    negative_mass: f64,
    neg: Gamma<f64>,
    pos: Gamma<f64>,
}

impl MarginalSampler {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let negative = rng.random::<f64>() < self.negative_mass;
        let t = if negative { self.neg.sample(rng) } else { self.pos.sample(rng) };
        let m = self.sigma * (2.0 * t).sqrt();
        if negative {
            self.a - m
        } else {
            self.a + m
        }
    }
}

/// Product of independent quasi-Gaussian marginals, one per coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductDensity {
    marginals: Vec<QuasiGaussian1D>,
}

impl ProductDensity {
    pub fn new(marginals: Vec<QuasiGaussian1D>) -> Result<Self> {
        if marginals.is_empty() {
            return Err(Error::invalid("marginals", "need at least one coordinate"));
        }
        Ok(ProductDensity { marginals })
    }

    /// Independent normal coordinates.
    pub fn gaussian(means: &[f64], sigmas: &[f64]) -> Result<Self> {
        if means.len() != sigmas.len() {
            return Err(Error::DimensionMismatch {
                expected: means.len(),
                got: sigmas.len(),
            });
        }
        let marginals = means
            .iter()
            .zip(sigmas)
            .map(|(&m, &s)| QuasiGaussian1D::gaussian(m, s))
            .collect::<Result<Vec<_>>>()?;
        Self::new(marginals)
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginals(&self) -> &[QuasiGaussian1D] {
        &self.marginals
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `sum_j ln p_j(x_j)`, `-inf` where any factor vanishes.
    pub fn ln_pdf(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.ln_pdf_unchecked(x))
    }

    pub(crate) fn ln_pdf_unchecked(&self, x: &[f64]) -> f64 {
        let mut total = 0.0;
        for (m, &xi) in self.marginals.iter().zip(x) {
            let l = m.ln_pdf(xi);
            if l == f64::NEG_INFINITY {
                return l;
            }
            total += l;
        }
        total
    }

    pub fn pdf(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.pdf_unchecked(x))
    }

    pub(crate) fn pdf_unchecked(&self, x: &[f64]) -> f64 {
        let mut p = 1.0;
        for (m, &xi) in self.marginals.iter().zip(x) {
            p *= m.pdf(xi);
            if p == 0.0 {
                return 0.0;
            }
        }
        p
    }

    /// Density at `base + off` with each offset from the quasi-center taken
    /// as `(base_j - a_j) + off_j`, exact when `base_j = a_j`.
    pub(crate) fn pdf_anchored(&self, base: &[f64], off: &[f64]) -> f64 {
        let mut p = 1.0;
        for ((m, &b), &o) in self.marginals.iter().zip(base).zip(off) {
            p *= m.pdf_at_offset((b - m.a()) + o);
            if p == 0.0 {
                return 0.0;
            }
        }
        p
    }
}

/// `log_pdf_product`: log-density of a product law.
pub fn log_pdf_product(density: &ProductDensity, x: &[f64]) -> Result<f64> {
    density.ln_pdf(x)
}

/// `pdf_1d`: density of a one-dimensional law.
pub fn pdf_1d(law: &QuasiGaussian1D, x: f64) -> f64 {
    law.pdf(x)
}

/// Dirac point mass of a mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub weight: f64,
    pub location: Vec<f64>,
}

/// Weighted mixture of product laws plus an optional point mass.
///
/// The continuous weights and the atom weight sum to one. A model may have
/// no continuous components only when the atom carries all the mass.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModel {
    weights: Vec<f64>,
    components: Vec<ProductDensity>,
    atom: Option<Atom>,
    dim: usize,
}

impl MixtureModel {
    pub fn new(weights: Vec<f64>, components: Vec<ProductDensity>, atom: Option<Atom>) -> Result<Self> {
        if weights.len() != components.len() {
            return Err(Error::invalid(
                "components",
                format!("{} weights for {} components", weights.len(), components.len()),
            ));
        }
        let dim = match (components.first(), &atom) {
            (Some(c), _) => c.dim(),
            (None, Some(atom)) => atom.location.len(),
            (None, None) => return Err(Error::invalid("components", "need at least one component")),
        };
        if dim == 0 {
            return Err(Error::invalid("dim", "must be >= 1"));
        }
        for (k, c) in components.iter().enumerate() {
            if c.dim() != dim {
                return Err(Error::invalid(
                    format!("components[{k}].marginals"),
                    format!("expected {dim} marginals, got {}", c.dim()),
                ));
            }
        }
        for (k, &w) in weights.iter().enumerate() {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::invalid(format!("components[{k}].weight"), format!("must be finite and > 0, got {w}")));
            }
        }
        let mut total: f64 = weights.iter().sum();
        if let Some(atom) = &atom {
            if !(atom.weight.is_finite() && atom.weight > 0.0 && atom.weight <= 1.0) {
                return Err(Error::invalid("atom.weight", format!("must lie in (0, 1], got {}", atom.weight)));
            }
            if atom.location.len() != dim {
                return Err(Error::invalid(
                    "atom.location",
                    format!("expected {dim} coordinates, got {}", atom.location.len()),
                ));
            }
            if let Some(j) = atom.location.iter().position(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("atom.location[{j}]"), "must be finite"));
            }
            total += atom.weight;
        }
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::invalid("weights", format!("atom and component weights sum to {total}, expected 1")));
        }
        Ok(MixtureModel {
            weights,
            components,
            atom,
            dim,
        })
    }

    /// A single product law with unit weight.
    pub fn single(component: ProductDensity) -> Self {
        let dim = component.dim();
        MixtureModel {
            weights: vec![1.0],
            components: vec![component],
            atom: None,
            dim,
        }
    }

    /// All mass on one point.
    pub fn atom_only(location: Vec<f64>) -> Result<Self> {
        Self::new(vec![], vec![], Some(Atom { weight: 1.0, location }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn components(&self) -> &[ProductDensity] {
        &self.components
    }
    pub fn atom(&self) -> Option<&Atom> {
        self.atom.as_ref()
    }
    pub fn atom_weight(&self) -> f64 {
        self.atom.as_ref().map_or(0.0, |a| a.weight)
    }
    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    /// Whether `x` is exactly (bitwise) the atom location.
    pub fn is_atom(&self, x: &[f64]) -> bool {
        self.atom
            .as_ref()
            .is_some_and(|a| a.location.len() == x.len() && a.location.iter().zip(x).all(|(p, q)| p.to_bits() == q.to_bits()))
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Density of the absolutely continuous part, `sum_k W_k p_k(x)`. The
    /// atom contributes nothing here.
    pub fn pdf(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.pdf_unchecked(x))
    }

    pub(crate) fn pdf_unchecked(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(&self.components).map(|(w, c)| w * c.pdf_unchecked(x)).sum()
    }

    /// Continuous density at `base + off`; see [`ProductDensity::pdf_anchored`].
    pub(crate) fn pdf_anchored(&self, base: &[f64], off: &[f64]) -> f64 {
        self.weights.iter().zip(&self.components).map(|(w, c)| w * c.pdf_anchored(base, off)).sum()
    }

    /// Log of the continuous density, accumulated in log space.
    pub fn ln_pdf(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let mut terms: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.components)
            .map(|(w, c)| w.ln() + c.ln_pdf_unchecked(x))
            .collect();
        Ok(log_sum_exp(&mut terms))
    }

    /// `n` i.i.d. draws; deterministic in `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = seed::stream_rng(seed, 0);
        self.sample_with(n, &mut rng)
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
        let samplers: Vec<Vec<MarginalSampler>> = self
            .components
            .iter()
            .map(|c| c.marginals.iter().map(QuasiGaussian1D::sampler).collect())
            .collect();
        let atom_weight = self.atom_weight();
        let continuous: f64 = self.weights.iter().sum();
        (0..n)
            .map(|_| {
                let u: f64 = rng.random();
                if let Some(atom) = &self.atom {
                    if u < atom_weight || self.components.is_empty() {
                        return atom.location.clone();
                    }
                }
                // Pick a component with probability proportional to its weight.
                let mut target = rng.random::<f64>() * continuous;
                let mut k = self.weights.len() - 1;
                for (i, w) in self.weights.iter().enumerate() {
                    if target < *w {
                        k = i;
                        break;
                    }
                    target -= w;
                }
                samplers[k].iter().map(|s| s.draw(rng)).collect()
            })
            .collect()
    }
}

impl From<ProductDensity> for MixtureModel {
    fn from(p: ProductDensity) -> Self {
        MixtureModel::single(p)
    }
}

impl From<QuasiGaussian1D> for MixtureModel {
    fn from(q: QuasiGaussian1D) -> Self {
        MixtureModel::single(ProductDensity { marginals: vec![q] })
    }
}

/// `mixture_pdf`: continuous density of a mixture.
pub fn mixture_pdf(model: &MixtureModel, x: &[f64]) -> Result<f64> {
    model.pdf(x)
}

/// `ln sum exp(terms)`. The terms are summed in sorted order so the result
/// does not depend on their arrangement.
pub(crate) fn log_sum_exp(terms: &mut [f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max.is_infinite() {
        return max;
    }
    terms.sort_by(f64::total_cmp);
    let s: f64 = terms.iter().map(|t| (t - max).exp()).sum();
    max + s.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn half_moment_closed_values() {
        assert!(rel(half_moment(1.0, 1.0).unwrap(), 1.0) < 1e-14);
        assert!(rel(half_moment(0.0, 1.0).unwrap(), (std::f64::consts::PI / 2.0).sqrt()) < 1e-14);
    }

    #[test]
    fn half_moment_domain_errors() {
        assert!(half_moment(-1.0, 1.0).is_err());
        assert!(half_moment(-1.5, 1.0).is_err());
        assert!(half_moment(0.5, 0.0).is_err());
        assert!(half_moment(0.5, -2.0).is_err());
        assert!(half_moment(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn normalization_examples() {
        let (c1, c2) = solve_normalization(0.0, 0.0, 1.0, 0.5).unwrap();
        assert!(rel(c1, 1.0) < 1e-14 && rel(c2, 1.0) < 1e-14);
        let (c1, c2) = solve_normalization(2.0, 2.0, 1.0, 0.5).unwrap();
        assert!(rel(c1, 1.0) < 1e-14 && rel(c2, 1.0) < 1e-14);
        let (c1, c2) = solve_normalization(1.0, 0.0, 1.0, 0.0).unwrap();
        assert_eq!(c1, 0.0);
        assert!(rel(c2, 2.0) < 1e-14);
        assert!(solve_normalization(0.0, 0.0, 1.0, 1.5).is_err());
        assert!(solve_normalization(-1.0, 0.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn construction_rejects_broken_normalization() {
        let err = QuasiGaussian1D::new(0.0, 0.0, 0.0, 1.0, 1.0, 1.1).unwrap_err();
        assert!(matches!(err, Error::Invalid { .. }));
        assert!(QuasiGaussian1D::new(0.0, 0.0, 0.0, 1.0, 0.0, 0.0).is_err());
        assert!(QuasiGaussian1D::new(0.0, 0.0, 0.0, 1.0, -1.0, 3.0).is_err());
    }

    #[test]
    fn gaussian_reduction_point_values() {
        let g = QuasiGaussian1D::gaussian(0.0, 1.0).unwrap();
        assert!(rel(g.pdf(0.0), 0.398_942_280_401_432_7) < 1e-15);
        assert!(rel(g.pdf(1.0), 0.241_970_724_519_143_37) < 1e-15);
    }

    #[test]
    fn fold_point_conventions() {
        let q = QuasiGaussian1D::from_mass_split(0.0, 1.0, 1.0, 1.0, 0.5).unwrap();
        assert_eq!(q.pdf(0.0), 0.0);
        assert_eq!(q.ln_pdf(0.0), f64::NEG_INFINITY);
        let s = QuasiGaussian1D::from_mass_split(2.0, -0.5, 1.0, 1.0, 0.5).unwrap();
        assert_eq!(s.pdf(2.0), f64::INFINITY);
        let one_sided = QuasiGaussian1D::from_mass_split(0.0, -0.5, 0.0, 1.0, 0.0).unwrap();
        assert!(one_sided.pdf(0.0).is_finite());
        assert_eq!(one_sided.pdf(-0.1), 0.0);
    }

    #[test]
    fn ln_pdf_agrees_with_pdf() {
        let q = QuasiGaussian1D::from_mass_split(0.3, 1.5, -0.4, 0.8, 0.3).unwrap();
        for x in [-2.0, -0.5, 0.29, 0.31, 1.0, 2.5] {
            assert!((q.ln_pdf(x) - q.pdf(x).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn product_dimension_mismatch() {
        let p = ProductDensity::gaussian(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!(matches!(p.ln_pdf(&[0.0]), Err(Error::DimensionMismatch { .. })));
        let v = log_pdf_product(&p, &[0.0, 0.0]).unwrap();
        assert!((v + 1.837_877_066_409_345_5).abs() < 1e-14);
    }

    #[test]
    fn product_zero_factor_is_neg_infinity() {
        let q = QuasiGaussian1D::from_mass_split(1.0, 2.0, 2.0, 1.0, 0.5).unwrap();
        let p = ProductDensity::new(vec![QuasiGaussian1D::gaussian(0.0, 1.0).unwrap(), q]).unwrap();
        assert_eq!(p.ln_pdf(&[0.3, 1.0]).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn mixture_invariants() {
        let c = ProductDensity::gaussian(&[0.0], &[1.0]).unwrap();
        assert!(MixtureModel::new(vec![0.5, 0.4], vec![c.clone(), c.clone()], None).is_err());
        assert!(MixtureModel::new(vec![0.5, 0.5], vec![c.clone(), c.clone()], None).is_ok());
        assert!(MixtureModel::new(vec![1.0, 0.0], vec![c.clone(), c.clone()], None).is_err());
        let atom = Atom {
            weight: 0.2,
            location: vec![3.0],
        };
        assert!(MixtureModel::new(vec![0.8], vec![c.clone()], Some(atom)).is_ok());
        assert!(MixtureModel::new(vec![], vec![], None).is_err());
    }

    #[test]
    fn atom_only_sampling() {
        let m = MixtureModel::atom_only(vec![1.5, -2.0]).unwrap();
        let xs = m.sample(50, 3);
        assert!(xs.iter().all(|x| x == &vec![1.5, -2.0]));
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let q = QuasiGaussian1D::from_mass_split(0.0, 0.5, 2.0, 1.0, 0.4).unwrap();
        let m = MixtureModel::from(q);
        assert_eq!(m.sample(20, 11), m.sample(20, 11));
        assert_ne!(m.sample(20, 11), m.sample(20, 12));
    }

    #[test]
    fn log_sum_exp_handles_infinities() {
        assert_eq!(log_sum_exp(&mut [f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
        assert!((log_sum_exp(&mut [0.0, 0.0]) - std::f64::consts::LN_2).abs() < 1e-15);
    }
}
