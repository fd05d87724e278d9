use super::{MpsaModel, PsaComponent, Responsibilities};
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Per-component data for evaluating `K_c` without materializing projectors.
///
/// The largest block (the last one among equally large blocks) is never
/// projected on explicitly; its squared norm is the residual
/// `‖x − μ‖² − Σ_{other blocks} ‖Qᵀ(x − μ)‖²`.
pub(crate) struct CostEvaluator<'a> {
    mean: &'a [f64],
    /// `−2 ln π + Σ γ_k ln λ_k`.
    offset: f64,
    /// Eigenvectors of the explicit blocks, stored row-wise.
    directions: Vec<f64>,
    /// `1/λ_k` for each explicit direction's block, with the block length.
    explicit: Vec<(usize, f64)>,
    residual_inv: f64,
}

impl<'a> CostEvaluator<'a> {
    pub(crate) fn new(comp: &'a PsaComponent) -> Self {
        let est = &comp.estimate;
        let p = est.dim();
        let parts = est.composition.parts();
        let residual_block = parts
            .iter()
            .enumerate()
            .fold(0, |best, (k, &g)| if g >= parts[best] { k } else { best });
        let mut directions = Vec::new();
        let mut explicit = Vec::new();
        for (k, r) in est.composition.blocks().enumerate() {
            if k == residual_block {
                continue;
            }
            explicit.push((r.len(), 1.0 / est.block_eigenvalues[k]));
            for j in r {
                directions.extend((0..p).map(|a| est.basis[(a, j)]));
            }
        }
        Self {
            mean: &est.mean,
            offset: -2.0 * comp.weight.ln() + est.log_det(),
            directions,
            explicit,
            residual_inv: 1.0 / est.block_eigenvalues[residual_block],
        }
    }

    pub(crate) fn cost(&self, x: &[f64], centered: &mut [f64]) -> f64 {
        let p = self.mean.len();
        for ((c, &xi), &mi) in centered.iter_mut().zip(x).zip(self.mean) {
            *c = xi - mi;
        }
        let norm2 = dot(centered, centered);
        let mut quad = 0.0;
        let mut projected = 0.0;
        let mut rows = self.directions.chunks_exact(p);
        for &(len, inv) in &self.explicit {
            let mut block = 0.0;
            for v in rows.by_ref().take(len) {
                let s = dot(v, centered);
                block += s * s;
            }
            projected += block;
            quad += block * inv;
        }
        let residual = (norm2 - projected).max(0.0);
        self.offset + quad + residual * self.residual_inv
    }
}

fn check_dims(x: &Matrix, model: &MpsaModel) -> Result<()> {
    if x.cols() != model.dim() {
        return Err(Error::input(format!(
            "data has {} columns, model dimension is {}",
            x.cols(),
            model.dim()
        )));
    }
    Ok(())
}

/// `K_c(x) = −2 ln π_c + Σ γ_ck ln λ_ck + Σ ‖Q_ckᵀ(x − μ_c)‖² / λ_ck`.
pub fn cost_k(x: &[f64], comp: &PsaComponent) -> f64 {
    let mut buf = vec![0.0; x.len()];
    CostEvaluator::new(comp).cost(x, &mut buf)
}

/// Fills `costs` (C×n, one row per component) with `K_c(x_i)`.
pub(crate) fn all_costs(x: &Matrix, model: &MpsaModel, costs: &mut Matrix) -> Result<()> {
    check_dims(x, model)?;
    let evaluators: Vec<CostEvaluator> = model.components.iter().map(CostEvaluator::new).collect();
    let mut buf = vec![0.0; x.cols()];
    for (i, row) in x.iter_rows().enumerate() {
        for (c, ev) in evaluators.iter().enumerate() {
            let k = ev.cost(row, &mut buf);
            if !k.is_finite() {
                return Err(Error::NonFiniteCost {
                    sample: i,
                    component: c,
                });
            }
            costs[(c, i)] = k;
        }
    }
    Ok(())
}

/// E-step together with the mixture log-likelihood of the same model, sharing
/// one pass of cost evaluations.
pub fn e_step_with_loglik(x: &Matrix, model: &MpsaModel) -> Result<(Responsibilities, f64)> {
    let n_comp = model.n_components();
    let n = x.rows();
    let mut t = Matrix::zeros(n_comp, n);
    all_costs(x, model, &mut t)?;
    let p = x.cols() as f64;
    let mut loglik = 0.0;
    for i in 0..n {
        let min_k = (0..n_comp).fold(f64::INFINITY, |m, c| m.min(t[(c, i)]));
        let mut total = 0.0;
        for c in 0..n_comp {
            let e = (-0.5 * (t[(c, i)] - min_k)).exp();
            t[(c, i)] = e;
            total += e;
        }
        for c in 0..n_comp {
            t[(c, i)] /= total;
        }
        loglik += -0.5 * (min_k + p * LN_2PI) + total.ln();
    }
    Ok((Responsibilities::from_matrix_unchecked(t), loglik))
}

/// Posterior component probabilities for every sample.
pub fn e_step(x: &Matrix, model: &MpsaModel) -> Result<Responsibilities> {
    e_step_with_loglik(x, model).map(|(t, _)| t)
}

/// `Σ_i ln Σ_c π_c N(x_i | μ_c, Σ_c)`.
pub fn log_likelihood(x: &Matrix, model: &MpsaModel) -> Result<f64> {
    e_step_with_loglik(x, model).map(|(_, ll)| ll)
}

/// Log-likelihood minus `alpha` times the mixture parameter count.
pub fn penalized_loglik(x: &Matrix, model: &MpsaModel, alpha: f64) -> Result<f64> {
    Ok(log_likelihood(x, model)? - alpha * model.kappa() as f64)
}

/// Hard assignment `argmin_c K_c(x)` (0-based, smallest index on ties).
pub fn predict(x: &Matrix, model: &MpsaModel) -> Result<Vec<usize>> {
    let mut costs = Matrix::zeros(model.n_components(), x.rows());
    all_costs(x, model, &mut costs)?;
    Ok((0..x.rows())
        .map(|i| {
            let mut best = 0;
            for c in 1..model.n_components() {
                if costs[(c, i)] < costs[(best, i)] {
                    best = c;
                }
            }
            best
        })
        .collect())
}
