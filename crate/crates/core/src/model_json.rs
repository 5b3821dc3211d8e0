//! JSON model documents.
//!
//! ```json
//! {"dim": 2,
//!  "atom": {"weight": 0.1, "location": [0.0, 0.0]} | null,
//!  "components": [{"weight": 0.9,
//!                  "marginals": [{"a": 0.0, "alpha_neg": 0.0, "alpha_pos": 0.0,
//!                                 "sigma": 1.0, "c_neg": 1.0, "c_pos": 1.0}, ...]}]}
//! ```
//!
//! Numbers are written as the shortest decimal that round-trips to the same
//! binary64 value, so a saved model reloads bit-for-bit. Loading re-validates
//! every invariant and reports the path of the first offending field.

use serde::{Deserialize, Serialize};

use crate::density::{Atom, MixtureModel, ProductDensity, QuasiGaussian1D};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginalDoc {
    pub a: f64,
    pub alpha_neg: f64,
    pub alpha_pos: f64,
    pub sigma: f64,
    pub c_neg: f64,
    pub c_pos: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentDoc {
    pub weight: f64,
    pub marginals: Vec<MarginalDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomDoc {
    pub weight: f64,
    pub location: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDoc {
    pub dim: usize,
    pub atom: Option<AtomDoc>,
    pub components: Vec<ComponentDoc>,
}

fn prefixed(prefix: &str, err: Error) -> Error {
    match err {
        Error::Invalid { path, message } => Error::Invalid {
            path: format!("{prefix}.{path}"),
            message,
        },
        other => other,
    }
}

impl From<&MixtureModel> for ModelDoc {
    fn from(model: &MixtureModel) -> Self {
        ModelDoc {
            dim: model.dim(),
            atom: model.atom().map(|a| AtomDoc {
                weight: a.weight,
                location: a.location.clone(),
            }),
            components: model
                .weights()
                .iter()
                .zip(model.components())
                .map(|(&weight, c)| ComponentDoc {
                    weight,
                    marginals: c
                        .marginals()
                        .iter()
                        .map(|m| MarginalDoc {
                            a: m.a(),
                            alpha_neg: m.alpha_neg(),
                            alpha_pos: m.alpha_pos(),
                            sigma: m.sigma(),
                            c_neg: m.c_neg(),
                            c_pos: m.c_pos(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

impl ModelDoc {
    pub fn to_model(&self) -> Result<MixtureModel> {
        if self.dim == 0 {
            return Err(Error::invalid("dim", "must be >= 1"));
        }
        let mut weights = Vec::with_capacity(self.components.len());
        let mut components = Vec::with_capacity(self.components.len());
        for (k, comp) in self.components.iter().enumerate() {
            if comp.marginals.len() != self.dim {
                return Err(Error::invalid(
                    format!("components[{k}].marginals"),
                    format!("expected {} marginals, got {}", self.dim, comp.marginals.len()),
                ));
            }
            let marginals = comp
                .marginals
                .iter()
                .enumerate()
                .map(|(j, m)| {
                    QuasiGaussian1D::new(m.a, m.alpha_neg, m.alpha_pos, m.sigma, m.c_neg, m.c_pos)
                        .map_err(|e| prefixed(&format!("components[{k}].marginals[{j}]"), e))
                })
                .collect::<Result<Vec<_>>>()?;
            weights.push(comp.weight);
            components.push(ProductDensity::new(marginals)?);
        }
        if let Some(atom) = &self.atom {
            if atom.location.len() != self.dim {
                return Err(Error::invalid(
                    "atom.location",
                    format!("expected {} coordinates, got {}", self.dim, atom.location.len()),
                ));
            }
        }
        let atom = self.atom.as_ref().map(|a| Atom {
            weight: a.weight,
            location: a.location.clone(),
        });
        MixtureModel::new(weights, components, atom)
    }
}

pub fn model_to_json(model: &MixtureModel) -> String {
    serde_json::to_string_pretty(&ModelDoc::from(model)).expect("model documents always serialize")
}

pub fn model_from_json(text: &str) -> Result<MixtureModel> {
    let doc: ModelDoc = serde_json::from_str(text).map_err(|e| Error::invalid("$", e.to_string()))?;
    doc.to_model()
}
