//! Quasi-Gaussian mixtures and Bayes-optimal partitions.
//!
//! * [`density`]: the one-dimensional quasi-Gaussian law, products of such
//!   laws, and weighted mixtures with an optional point mass.
//! * [`decision`]: weighted multi-hypothesis risk, the optimal rule and its
//!   quadrature or Monte Carlo evaluation.
//! * [`transport`]: the same problem on a grid, solved as a linear program.
//! * [`estimation`]: maximum-likelihood fitting, cluster-count selection and
//!   the polar independence check.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decision;
pub mod density;
pub mod error;
pub mod estimation;
pub mod model_json;
pub mod quadrature;
pub mod seed;
pub mod special;
pub mod transport;

pub use decision::{
    minimal_risk, optimal_rule, risk_monte_carlo, risk_quadrature, validate_rule, DecisionRule, ErrorMatrix,
    HypothesisFamily, QuadratureSpec, RiskReport, RuleKind, WeightMatrix,
};
pub use density::{half_moment, solve_normalization, Atom, MixtureModel, ProductDensity, QuasiGaussian1D};
pub use error::{Error, Result};
pub use estimation::{fit, log_likelihood, FitConfig, FitResult};
pub use model_json::{model_from_json, model_to_json};
