use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::estep::e_step_with_loglik;
use super::kmeans::kmeans_init;
use super::mstep::{assemble, component_stats, reseed_light_components};
use super::select::{select_component_type, RelativeScale, ScoreContext, Strategy};
use super::{MpsaModel, Responsibilities};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::psa::Composition;

/// Penalty weight of the penalized log-likelihood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Alpha {
    /// `ln(n) / 2`.
    Bic,
    Value(f64),
}

impl Alpha {
    pub fn resolve(self, n: usize) -> f64 {
        match self {
            Alpha::Bic => (n as f64).ln() / 2.0,
            Alpha::Value(a) => a,
        }
    }
}

/// Compositions the components start from.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum InitialTypes {
    /// Full for top-down, spherical otherwise.
    #[default]
    Default,
    Spherical,
    Full,
    Explicit(Vec<Composition>),
}

/// Whether the smallest block eigenvalue is tied across components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SharedNoise {
    /// Components are fitted independently.
    #[default]
    Off,
    /// After every M-step the last block eigenvalue of each component is set
    /// to `σ² = Σ_c π_c λ_{c,d_c}`, capped by the preceding block eigenvalue.
    DuringFit,
}

#[derive(Debug, Clone)]
pub struct FitConfig {
    pub max_iter: usize,
    pub rel_tol: f64,
    pub seed: u64,
    pub strategy: Strategy,
    pub alpha: Alpha,
    pub reg_eps: f64,
    pub kmeans_max_iter: usize,
    pub kmeans_restarts: usize,
    pub relative_scale: RelativeScale,
    pub initial_types: InitialTypes,
    /// 0-based labels; when present, responsibilities are seeded from them
    /// and a single iteration is run.
    pub labels: Option<Vec<usize>>,
    pub shared_noise: SharedNoise,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iter: 200,
            rel_tol: 1e-6,
            seed: 0,
            strategy: Strategy::Hierarchical,
            alpha: Alpha::Bic,
            reg_eps: 1e-6,
            kmeans_max_iter: 300,
            kmeans_restarts: 10,
            relative_scale: RelativeScale::Component,
            initial_types: InitialTypes::Default,
            labels: None,
            shared_noise: SharedNoise::Off,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::input("max_iter must be positive"));
        }
        if !(self.rel_tol >= 0.0) {
            return Err(Error::input("rel_tol must be nonnegative"));
        }
        if !(self.reg_eps >= 0.0) {
            return Err(Error::input("regularization eps must be nonnegative"));
        }
        if let Alpha::Value(a) = self.alpha {
            if !(a >= 0.0) || !a.is_finite() {
                return Err(Error::input("alpha must be a nonnegative number"));
            }
        }
        if self.kmeans_max_iter == 0 || self.kmeans_restarts == 0 {
            return Err(Error::input("k-means iterations and restarts must be positive"));
        }
        if let Strategy::Hdmi { sigma2 } = self.strategy {
            if !(sigma2 > 0.0) {
                return Err(Error::input("the HDMI noise variance must be positive"));
            }
        }
        Ok(())
    }

    fn initial_compositions(&self, p: usize, n_components: usize) -> Result<Vec<Composition>> {
        let one = |full: bool| {
            if full {
                Composition::full(p)
            } else {
                Composition::spherical(p)
            }
        };
        Ok(match &self.initial_types {
            InitialTypes::Default => vec![one(self.strategy == Strategy::TopDown); n_components],
            InitialTypes::Spherical => vec![one(false); n_components],
            InitialTypes::Full => vec![one(true); n_components],
            InitialTypes::Explicit(gammas) => {
                if gammas.len() != n_components {
                    return Err(Error::input(format!(
                        "{} compositions given for {n_components} components",
                        gammas.len()
                    )));
                }
                if let Some(g) = gammas.iter().find(|g| g.ambient() != p) {
                    return Err(Error::input(format!("composition {g} does not sum to {p}")));
                }
                gammas.clone()
            }
        })
    }
}

/// State after one iteration of a fit.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// 1-based.
    pub iteration: usize,
    pub loglik: f64,
    pub penalized_loglik: f64,
    pub kappa: usize,
    pub compositions: Vec<Composition>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitTrace {
    pub records: Vec<IterationRecord>,
    /// `(iteration, component)` pairs where a light component was re-seeded.
    pub reseeds: Vec<(usize, usize)>,
    pub converged: bool,
}

impl FitTrace {
    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    /// Largest decrease of the penalized log-likelihood between consecutive
    /// records (zero for a monotone trace).
    pub fn max_decrease(&self) -> f64 {
        self.records
            .windows(2)
            .map(|w| w[0].penalized_loglik - w[1].penalized_loglik)
            .fold(0.0, f64::max)
    }
}

fn share_noise(model: &mut MpsaModel) {
    let sigma2: f64 = model
        .components
        .iter()
        .map(|c| c.weight * c.smallest_eigenvalue())
        .sum();
    for comp in &mut model.components {
        let lambdas = &mut comp.estimate.block_eigenvalues;
        let d = lambdas.len();
        let cap = if d > 1 { lambdas[d - 2] } else { f64::INFINITY };
        lambdas[d - 1] = sigma2.min(cap);
    }
}

fn initial_responsibilities(
    x: &Matrix,
    n_components: usize,
    config: &FitConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Responsibilities> {
    match &config.labels {
        Some(labels) => {
            if labels.len() != x.rows() {
                return Err(Error::input(format!(
                    "{} labels for {} samples",
                    labels.len(),
                    x.rows()
                )));
            }
            Responsibilities::from_labels(labels, n_components)
        }
        None => kmeans_init(x, n_components, config, rng),
    }
}

fn run(x: &Matrix, n_components: usize, config: &FitConfig, penalized_stop: bool) -> Result<(MpsaModel, FitTrace)> {
    config.validate()?;
    let (n, p) = (x.rows(), x.cols());
    if n == 0 || p == 0 {
        return Err(Error::input("empty data matrix"));
    }
    if n_components == 0 {
        return Err(Error::input("need at least one component"));
    }
    if !x.is_finite() {
        return Err(Error::input("data contains non-finite values"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let alpha = config.alpha.resolve(n);
    let mut gammas = config.initial_compositions(p, n_components)?;
    let mut t = initial_responsibilities(x, n_components, config, &mut rng)?;
    let max_iter = if config.labels.is_some() { 1 } else { config.max_iter };

    let mut trace = FitTrace::default();
    let mut model = None;
    for iteration in 1..=max_iter {
        for c in reseed_light_components(&mut t) {
            trace.reseeds.push((iteration, c));
        }
        let stats = component_stats(x, &t, config.reg_eps)?;
        let next: Vec<Composition> = stats
            .iter()
            .zip(&gammas)
            .map(|(s, g)| {
                let ctx = ScoreContext {
                    n,
                    weight: s.weight,
                    alpha,
                    relative_scale: config.relative_scale,
                };
                select_component_type(&s.spectrum, g, config.strategy, &ctx)
            })
            .collect::<Result<_>>()?;
        let changed = next != gammas;
        gammas = next;
        let mut fitted = assemble(&stats, &gammas, alpha)?;
        if config.shared_noise == SharedNoise::DuringFit {
            share_noise(&mut fitted);
        }
        let (t_next, loglik) = e_step_with_loglik(x, &fitted)?;
        t = t_next;
        let kappa = fitted.kappa();
        let record = IterationRecord {
            iteration,
            loglik,
            penalized_loglik: loglik - alpha * kappa as f64,
            kappa,
            compositions: gammas.clone(),
        };
        let stop = trace.records.last().is_some_and(|prev| {
            let (a, b) = if penalized_stop {
                (prev.penalized_loglik, record.penalized_loglik)
            } else {
                (prev.loglik, record.loglik)
            };
            (b - a) / a.abs().max(f64::MIN_POSITIVE) < config.rel_tol && !changed
        });
        trace.records.push(record);
        model = Some(fitted);
        if stop {
            trace.converged = true;
            break;
        }
    }
    Ok((model.expect("at least one iteration"), trace))
}

/// Fixed-type EM initialized by k-means.
pub fn em_fit(x: &Matrix, n_components: usize, gammas: &[Composition], config: &FitConfig) -> Result<(MpsaModel, FitTrace)> {
    let config = FitConfig {
        strategy: Strategy::Fixed,
        initial_types: InitialTypes::Explicit(gammas.to_vec()),
        ..config.clone()
    };
    run(x, n_components, &config, false)
}

/// Componentwise penalized EM: every iteration re-selects each component's
/// composition, then runs an M-step and an E-step.
pub fn cpem_fit(x: &Matrix, n_components: usize, config: &FitConfig) -> Result<(MpsaModel, FitTrace)> {
    run(x, n_components, config, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn gaussian_blobs(seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        for i in 0..300 {
            let (cx, sx, sy) = if i % 2 == 0 { (-4.0, 1.0, 0.2) } else { (4.0, 0.5, 0.5) };
            let u: f64 = rng.random::<f64>() - 0.5;
            let v: f64 = rng.random::<f64>() - 0.5;
            let w: f64 = rng.random::<f64>() - 0.5;
            rows.push(vec![cx + sx * u * 3.0, sy * v * 3.0, 0.3 * w]);
        }
        Matrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn cpem_trace_is_monotone() {
        let x = gaussian_blobs(5);
        for strategy in [
            Strategy::Hierarchical,
            Strategy::Relative,
            Strategy::BottomUp,
            Strategy::TopDown,
        ] {
            let config = FitConfig {
                strategy,
                seed: 11,
                ..FitConfig::default()
            };
            let (model, trace) = cpem_fit(&x, 2, &config).unwrap();
            assert!(trace.max_decrease() <= 1e-8, "{strategy}: {}", trace.max_decrease());
            assert_eq!(model.kappa(), trace.last().unwrap().kappa);
        }
    }

    #[test]
    fn em_loglik_is_monotone_and_types_fixed() {
        let x = gaussian_blobs(6);
        let g = vec![Composition::spherical(3); 2];
        let (model, trace) = em_fit(&x, 2, &g, &FitConfig::default()).unwrap();
        assert_eq!(model.compositions(), g);
        for w in trace.records.windows(2) {
            assert!(w[1].loglik >= w[0].loglik - 1e-8);
        }
    }

    #[test]
    fn single_component_converges_immediately() {
        let x = gaussian_blobs(7);
        let g = vec![Composition::new(vec![1, 2]).unwrap()];
        let (_, trace) = em_fit(&x, 1, &g, &FitConfig::default()).unwrap();
        assert!(trace.converged);
        assert_eq!(trace.records.len(), 2);
        let r = &trace.records;
        assert!((r[1].loglik - r[0].loglik).abs() < 1e-12 * r[0].loglik.abs());
    }

    #[test]
    fn supervised_mode_runs_one_iteration() {
        let x = gaussian_blobs(8);
        let labels: Vec<usize> = (0..300).map(|i| i % 2).collect();
        let config = FitConfig {
            labels: Some(labels),
            ..FitConfig::default()
        };
        let (model, trace) = cpem_fit(&x, 2, &config).unwrap();
        assert_eq!(trace.records.len(), 1);
        assert!((model.components[0].weight - 0.5).abs() < 1e-15);
        assert!(model.components[0].mean()[0] < 0.0 && model.components[1].mean()[0] > 0.0);
    }

    #[test]
    fn determinism() {
        let x = gaussian_blobs(9);
        let config = FitConfig {
            seed: 4,
            ..FitConfig::default()
        };
        let a = cpem_fit(&x, 2, &config).unwrap();
        let b = cpem_fit(&x, 2, &config).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn shared_noise_ties_last_eigenvalues() {
        let x = gaussian_blobs(10);
        let config = FitConfig {
            shared_noise: SharedNoise::DuringFit,
            initial_types: InitialTypes::Explicit(vec![Composition::ppca(3, 1); 2]),
            strategy: Strategy::Fixed,
            ..FitConfig::default()
        };
        let (model, _) = cpem_fit(&x, 2, &config).unwrap();
        let a = model.components[0].smallest_eigenvalue();
        let b = model.components[1].smallest_eigenvalue();
        let lead = model.components.iter().map(|c| c.estimate.block_eigenvalues[0]).fold(f64::INFINITY, f64::min);
        if a < lead && b < lead {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn invalid_config_is_rejected() {
        let x = gaussian_blobs(1);
        let bad = FitConfig {
            alpha: Alpha::Value(-1.0),
            ..FitConfig::default()
        };
        assert!(cpem_fit(&x, 2, &bad).is_err());
        let bad = FitConfig {
            initial_types: InitialTypes::Explicit(vec![Composition::full(2)]),
            ..FitConfig::default()
        };
        assert!(cpem_fit(&x, 1, &bad).is_err());
    }
}
