use serde::{Deserialize, Serialize};

use super::{MpsaModel, PsaComponent};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::psa::{Composition, PsaEstimate};

/// Value of the `version` field of model documents.
pub const MODEL_VERSION: &str = "mpsa-model/1";

const ORTHONORMAL_TOL: f64 = 1e-8;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    version: String,
    p: usize,
    #[serde(rename = "C")]
    n_components: usize,
    alpha: f64,
    components: Vec<ComponentDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComponentDoc {
    weight: f64,
    mean: Vec<f64>,
    composition: Composition,
    block_eigenvalues: Vec<f64>,
    /// Row-major `p×p`.
    basis: Vec<f64>,
}

/// Pretty-printed JSON model document.
pub fn serialize(model: &MpsaModel) -> String {
    let doc = ModelDoc {
        version: MODEL_VERSION.to_string(),
        p: model.dim(),
        n_components: model.n_components(),
        alpha: model.alpha,
        components: model
            .components
            .iter()
            .map(|c| ComponentDoc {
                weight: c.weight,
                mean: c.estimate.mean.clone(),
                composition: c.estimate.composition.clone(),
                block_eigenvalues: c.estimate.block_eigenvalues.clone(),
                basis: c.estimate.basis.as_slice().to_vec(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("model documents always serialize")
}

fn check_orthonormal(c: usize, basis: &Matrix) -> Result<()> {
    let gram = basis.transpose().matmul(basis)?;
    let err = gram.max_abs_diff(&Matrix::identity(basis.rows()));
    if err > ORTHONORMAL_TOL {
        return Err(Error::Validation(format!(
            "component {c}: basis is not orthonormal (deviation {err:e})"
        )));
    }
    Ok(())
}

/// Parses and validates a model document.
pub fn deserialize(text: &str) -> Result<MpsaModel> {
    let doc: ModelDoc = serde_json::from_str(text).map_err(|e| {
        Error::parse(format!("line {}, column {}", e.line(), e.column()), e.to_string())
    })?;
    if doc.version != MODEL_VERSION {
        return Err(Error::Validation(format!(
            "unsupported model version {:?}, expected {MODEL_VERSION:?}",
            doc.version
        )));
    }
    if doc.components.len() != doc.n_components {
        return Err(Error::Validation(format!(
            "C = {} but {} components are listed",
            doc.n_components,
            doc.components.len()
        )));
    }
    let p = doc.p;
    let components = doc
        .components
        .into_iter()
        .enumerate()
        .map(|(c, comp)| {
            if comp.mean.len() != p || comp.composition.ambient() != p {
                return Err(Error::Validation(format!("component {c}: dimension differs from p = {p}")));
            }
            if comp.basis.len() != p * p {
                return Err(Error::Validation(format!(
                    "component {c}: basis has {} entries, expected {}",
                    comp.basis.len(),
                    p * p
                )));
            }
            let basis = Matrix::from_row_major(p, p, comp.basis)?;
            check_orthonormal(c, &basis)?;
            if comp.block_eigenvalues.windows(2).any(|w| w[1] > w[0]) {
                return Err(Error::Validation(format!(
                    "component {c}: block eigenvalues must be non-increasing"
                )));
            }
            Ok(PsaComponent {
                weight: comp.weight,
                estimate: PsaEstimate {
                    composition: comp.composition,
                    block_eigenvalues: comp.block_eigenvalues,
                    basis,
                    mean: comp.mean,
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if !doc.alpha.is_finite() || doc.alpha < 0.0 {
        return Err(Error::Validation("alpha must be a nonnegative number".into()));
    }
    MpsaModel::new(components, doc.alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sym_eig;

    fn model() -> MpsaModel {
        let a = Matrix::from_rows(&[vec![2.0, 0.3, 0.1], vec![0.3, 1.0, 0.2], vec![0.1, 0.2, 0.5]]).unwrap();
        let eig = sym_eig(&a).unwrap();
        let g = Composition::new(vec![1, 2]).unwrap();
        let comp = |w: f64, m: f64| PsaComponent {
            weight: w,
            estimate: crate::psa::psa_mle(&eig, &[m, -m / 3.0, 0.1 * m], &g).unwrap(),
        };
        MpsaModel::new(vec![comp(0.3, 1.0 / 7.0), comp(0.7, -2.0 / 3.0)], 1.234_567_890_123).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let m = model();
        let back = deserialize(&serialize(&m)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn missing_weight_reports_location() {
        let text = serialize(&model()).replacen("\"weight\": 0.3,", "", 1);
        match deserialize(&text) {
            Err(Error::Parse { location, message }) => {
                assert!(location.starts_with("line "), "{location}");
                assert!(message.contains("weight"), "{message}");
            }
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn bad_weights_fail_validation() {
        let text = serialize(&model()).replacen("\"weight\": 0.3,", "\"weight\": 0.2,", 1);
        assert!(matches!(deserialize(&text), Err(Error::Validation(_))));
    }

    #[test]
    fn unknown_fields_and_versions_are_rejected() {
        let text = serialize(&model()).replacen("\"alpha\"", "\"beta\": 1, \"alpha\"", 1);
        assert!(matches!(deserialize(&text), Err(Error::Parse { .. })));
        let text = serialize(&model()).replace(MODEL_VERSION, "mpsa-model/0");
        assert!(matches!(deserialize(&text), Err(Error::Validation(_))));
    }
}
