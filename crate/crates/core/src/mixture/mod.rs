//! Mixtures of PSA components: E-step, M-step, fixed-type EM and the
//! componentwise penalized EM that also learns each component's composition.

mod estep;
mod fit;
mod io;
mod kmeans;
mod mstep;
mod select;

pub use estep::{cost_k, e_step, e_step_with_loglik, log_likelihood, penalized_loglik, predict};
pub use fit::{cpem_fit, em_fit, Alpha, FitConfig, FitTrace, InitialTypes, IterationRecord, SharedNoise};
pub use io::{deserialize, serialize, MODEL_VERSION};
pub use kmeans::{kmeans, kmeans_init, KMeansResult};
pub use mstep::{component_stats, handle_empty_component, m_step, ComponentStats, MIN_COMPONENT_MASS};
pub use select::{component_score, select_component_type, RelativeScale, ScoreContext, Strategy};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::psa::{kappa_psa, Composition, PsaEstimate};

/// Tolerance on `Σ π_c = 1` accepted when validating a model.
pub const WEIGHT_SUM_TOL: f64 = 1e-6;

/// One Gaussian component with a piecewise-constant covariance spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct PsaComponent {
    pub weight: f64,
    pub estimate: PsaEstimate,
}

impl PsaComponent {
    pub fn mean(&self) -> &[f64] {
        &self.estimate.mean
    }

    pub fn composition(&self) -> &Composition {
        &self.estimate.composition
    }

    pub fn kappa(&self) -> usize {
        kappa_psa(&self.estimate.composition)
    }

    /// Smallest (last-block) eigenvalue.
    pub fn smallest_eigenvalue(&self) -> f64 {
        *self
            .estimate
            .block_eigenvalues
            .last()
            .expect("a composition has at least one block")
    }
}

/// A fitted (or generating) MPSA model.
#[derive(Debug, Clone, PartialEq)]
pub struct MpsaModel {
    pub components: Vec<PsaComponent>,
    /// Penalty weight the model was fitted with.
    pub alpha: f64,
}

impl MpsaModel {
    pub fn new(components: Vec<PsaComponent>, alpha: f64) -> Result<Self> {
        let model = Self { components, alpha };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.components.first() else {
            return Err(Error::Validation("a model needs at least one component".into()));
        };
        let p = first.estimate.dim();
        let mut total = 0.0;
        for (c, comp) in self.components.iter().enumerate() {
            let est = &comp.estimate;
            if !(comp.weight > 0.0 && comp.weight <= 1.0) {
                return Err(Error::Validation(format!(
                    "component {c}: weight {} outside (0, 1]",
                    comp.weight
                )));
            }
            total += comp.weight;
            if est.dim() != p || est.composition.ambient() != p {
                return Err(Error::Validation(format!(
                    "component {c}: dimension mismatch (expected {p})"
                )));
            }
            if est.basis.rows() != p || est.basis.cols() != p {
                return Err(Error::Validation(format!(
                    "component {c}: basis must be {p}x{p}"
                )));
            }
            if est.block_eigenvalues.len() != est.composition.len() {
                return Err(Error::Validation(format!(
                    "component {c}: {} block eigenvalues for {} blocks",
                    est.block_eigenvalues.len(),
                    est.composition.len()
                )));
            }
            if est.block_eigenvalues.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
                return Err(Error::Validation(format!(
                    "component {c}: block eigenvalues must be positive and finite"
                )));
            }
            if est.mean.iter().any(|m| !m.is_finite()) || !est.basis.is_finite() {
                return Err(Error::Validation(format!(
                    "component {c}: non-finite parameters"
                )));
            }
        }
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::Validation(format!("weights sum to {total}, expected 1")));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.components[0].estimate.dim()
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn compositions(&self) -> Vec<Composition> {
        self.components.iter().map(|c| c.composition().clone()).collect()
    }

    /// `C − 1 + Σ_c κ(γ_c)`.
    pub fn kappa(&self) -> usize {
        mixture_kappa(&self.compositions())
    }
}

/// Free-parameter count of a mixture with the given component types.
pub fn mixture_kappa(gammas: &[Composition]) -> usize {
    gammas.len().saturating_sub(1) + gammas.iter().map(kappa_psa).sum::<usize>()
}

/// Posterior membership probabilities, one row per component and one column
/// per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities {
    t: Matrix,
}

impl Responsibilities {
    pub fn from_matrix(t: Matrix) -> Result<Self> {
        if t.rows() == 0 || t.cols() == 0 {
            return Err(Error::input("responsibilities need at least one component and sample"));
        }
        if t.as_slice().iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::input("responsibilities must lie in [0, 1]"));
        }
        let r = Self { t };
        for i in 0..r.n_samples() {
            let s: f64 = (0..r.n_components()).map(|c| r.get(c, i)).sum();
            if (s - 1.0).abs() > 1e-10 {
                return Err(Error::input(format!("column {i} sums to {s}")));
            }
        }
        Ok(r)
    }

    /// Hard 0/1 assignments from 0-based labels.
    pub fn from_labels(labels: &[usize], n_components: usize) -> Result<Self> {
        if labels.is_empty() || n_components == 0 {
            return Err(Error::input("need at least one sample and one component"));
        }
        let mut t = Matrix::zeros(n_components, labels.len());
        for (i, &l) in labels.iter().enumerate() {
            if l >= n_components {
                return Err(Error::input(format!(
                    "label {l} out of range for {n_components} components"
                )));
            }
            t[(l, i)] = 1.0;
        }
        Ok(Self { t })
    }

    pub(crate) fn from_matrix_unchecked(t: Matrix) -> Self {
        Self { t }
    }

    pub fn n_components(&self) -> usize {
        self.t.rows()
    }

    pub fn n_samples(&self) -> usize {
        self.t.cols()
    }

    pub fn get(&self, c: usize, i: usize) -> f64 {
        self.t[(c, i)]
    }

    /// Responsibilities of component `c` for every sample.
    pub fn component(&self, c: usize) -> &[f64] {
        self.t.row(c)
    }

    /// `Σ_i t_ci`.
    pub fn mass(&self, c: usize) -> f64 {
        self.t.row(c).iter().sum()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.t
    }

    /// Per-sample argmax, smallest component index on ties.
    pub fn hard_labels(&self) -> Vec<usize> {
        (0..self.n_samples())
            .map(|i| {
                let mut best = 0;
                for c in 1..self.n_components() {
                    if self.get(c, i) > self.get(best, i) {
                        best = c;
                    }
                }
                best
            })
            .collect()
    }

    pub(crate) fn matrix_mut(&mut self) -> &mut Matrix {
        &mut self.t
    }
}
