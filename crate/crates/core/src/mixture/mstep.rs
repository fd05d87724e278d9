use super::{MpsaModel, PsaComponent, Responsibilities};
use crate::error::{Error, Result};
use crate::linalg::{regularize, sym_eig, weighted_mean, weighted_scatter, Matrix, SpectralDecomposition};
use crate::psa::{psa_mle, Composition};

/// Components whose responsibility mass `Σ_i t_ci` falls below this are
/// re-seeded before the M-step.
pub const MIN_COMPONENT_MASS: f64 = 2.0;

/// Responsibility-weighted sufficient statistics of one component.
#[derive(Debug, Clone)]
pub struct ComponentStats {
    /// `π̂_c = Σ_i t_ci / n`.
    pub weight: f64,
    /// `Σ_i t_ci`.
    pub mass: f64,
    pub mean: Vec<f64>,
    /// Decomposition of the regularized weighted scatter `S_c`.
    pub spectrum: SpectralDecomposition,
}

/// Weights, means and scatter spectra for every component.
pub fn component_stats(x: &Matrix, t: &Responsibilities, eps: f64) -> Result<Vec<ComponentStats>> {
    if t.n_samples() != x.rows() {
        return Err(Error::input(format!(
            "responsibilities cover {} samples, data has {}",
            t.n_samples(),
            x.rows()
        )));
    }
    let n = x.rows() as f64;
    (0..t.n_components())
        .map(|c| {
            let w = t.component(c);
            let mass: f64 = w.iter().sum();
            let mean = weighted_mean(x, w)?;
            let scatter = regularize(&weighted_scatter(x, w, &mean)?, eps)?;
            Ok(ComponentStats {
                weight: mass / n,
                mass,
                mean,
                spectrum: sym_eig(&scatter)?,
            })
        })
        .collect()
}

/// Builds the model whose component `c` is the PSA fit of type `gammas[c]`.
pub(crate) fn assemble(stats: &[ComponentStats], gammas: &[Composition], alpha: f64) -> Result<MpsaModel> {
    if stats.len() != gammas.len() {
        return Err(Error::input(format!(
            "{} compositions for {} components",
            gammas.len(),
            stats.len()
        )));
    }
    let components = stats
        .iter()
        .zip(gammas)
        .map(|(s, g)| {
            Ok(PsaComponent {
                weight: s.weight,
                estimate: psa_mle(&s.spectrum, &s.mean, g)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some((c, comp)) = components
        .iter()
        .enumerate()
        .find(|(_, comp)| comp.estimate.block_eigenvalues.iter().any(|&l| !(l > 0.0)))
    {
        return Err(Error::Numerical(format!(
            "component {c} has a non-positive block eigenvalue {:?}; increase the regularization",
            comp.estimate.block_eigenvalues
        )));
    }
    MpsaModel::new(components, alpha)
}

/// Gives component `c` full responsibility for the least-claimed sample: the
/// one whose largest responsibility is smallest. Among equally claimed
/// samples, one owned by the heaviest other component is taken, then the
/// lowest index.
pub fn handle_empty_component(t: &Responsibilities, c: usize) -> Responsibilities {
    let mut out = t.clone();
    reseed(&mut out, c);
    out
}

fn reseed(t: &mut Responsibilities, c: usize) {
    let n_comp = t.n_components();
    let masses: Vec<f64> = (0..n_comp).map(|k| t.mass(k)).collect();
    let owners = t.hard_labels();
    let mut best: Option<(usize, f64, f64)> = None;
    for (i, &owner) in owners.iter().enumerate() {
        let claim = t.get(owner, i);
        let owner_mass = if owner == c { f64::NEG_INFINITY } else { masses[owner] };
        let better = match best {
            None => true,
            Some((_, best_claim, best_mass)) => {
                claim < best_claim || (claim == best_claim && owner_mass > best_mass)
            }
        };
        if better {
            best = Some((i, claim, owner_mass));
        }
    }
    let Some((i, _, _)) = best else { return };
    let m = t.matrix_mut();
    for k in 0..n_comp {
        m[(k, i)] = if k == c { 1.0 } else { 0.0 };
    }
}

/// Re-seeds every component lighter than [`MIN_COMPONENT_MASS`]; returns the
/// indices of the components that were touched.
pub(crate) fn reseed_light_components(t: &mut Responsibilities) -> Vec<usize> {
    let mut touched = Vec::new();
    for c in 0..t.n_components() {
        if t.mass(c) < MIN_COMPONENT_MASS && t.n_samples() > t.n_components() {
            reseed(t, c);
            touched.push(c);
        }
    }
    touched
}

/// Maximizes the expected complete-data log-likelihood for fixed types.
pub fn m_step(x: &Matrix, t: &Responsibilities, gammas: &[Composition], eps: f64) -> Result<MpsaModel> {
    let mut t = t.clone();
    reseed_light_components(&mut t);
    let stats = component_stats(x, &t, eps)?;
    assemble(&stats, gammas, 0.0)
}
