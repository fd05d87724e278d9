use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::SpectralDecomposition;
use crate::psa::{
    candidates_hierarchical, candidates_relative, hdmi_dimension, kappa_psa, lower_neighbors,
    upper_neighbors, Composition,
};

/// How the candidate compositions of a component are generated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strategy {
    /// Keep the initial compositions (plain EM).
    Fixed,
    /// The nested chain from single-linkage clustering of the eigenvalues.
    Hierarchical,
    /// The single composition obtained by thresholding relative eigengaps.
    Relative,
    /// Split/merge neighbors, starting from isotropic components.
    BottomUp,
    /// Split/merge neighbors, starting from full components.
    TopDown,
    /// `(1^q, p − q)` with `q` matched to a known noise variance. Not a
    /// penalized selection; no monotonicity guarantee.
    Hdmi { sigma2: f64 },
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Fixed => "fixed",
            Strategy::Hierarchical => "hierarchical",
            Strategy::Relative => "relative",
            Strategy::BottomUp => "bottom-up",
            Strategy::TopDown => "top-down",
            Strategy::Hdmi { .. } => "hdmi",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fixed" => Ok(Strategy::Fixed),
            "hierarchical" | "h" => Ok(Strategy::Hierarchical),
            "relative" | "r" => Ok(Strategy::Relative),
            "bottom-up" | "bottomup" | "u" => Ok(Strategy::BottomUp),
            "top-down" | "topdown" | "d" => Ok(Strategy::TopDown),
            other => Err(Error::input(format!("unknown strategy {other:?}"))),
        }
    }
}

/// Sample size fed to the relative-eigengap threshold of one component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RelativeScale {
    /// `n π̂_c`, the component's share of the data.
    #[default]
    Component,
    /// The total sample size `n`.
    Total,
}

/// Quantities the component score depends on besides the spectrum.
#[derive(Debug, Clone, Copy)]
pub struct ScoreContext {
    pub n: usize,
    pub weight: f64,
    pub alpha: f64,
    pub relative_scale: RelativeScale,
}

struct PrefixSums(Vec<f64>);

impl PrefixSums {
    fn new(eigenvalues: &[f64]) -> Self {
        let mut acc = Vec::with_capacity(eigenvalues.len() + 1);
        acc.push(0.0);
        let mut s = 0.0;
        for &l in eigenvalues {
            s += l;
            acc.push(s);
        }
        Self(acc)
    }

    /// `Σ_k γ_k ln λ̂_k`.
    fn log_det(&self, gamma: &Composition) -> f64 {
        gamma
            .blocks()
            .map(|r| {
                let len = r.len() as f64;
                let mean = (self.0[r.end] - self.0[r.start]) / len;
                len * mean.ln()
            })
            .sum()
    }
}

fn score_with(prefix: &PrefixSums, gamma: &Composition, n: usize, weight: f64, alpha: f64) -> f64 {
    -0.5 * n as f64 * weight * prefix.log_det(gamma) - alpha * kappa_psa(gamma) as f64
}

/// `Ψ_c(γ) − α κ(γ)` up to a γ-independent constant:
/// `−(n π_c / 2) Σ_k γ_k ln λ̂_k − α κ(γ)`. Higher is better.
pub fn component_score(eigenvalues: &[f64], gamma: &Composition, n: usize, weight: f64, alpha: f64) -> f64 {
    assert_eq!(eigenvalues.len(), gamma.ambient(), "spectrum/composition mismatch");
    score_with(&PrefixSums::new(eigenvalues), gamma, n, weight, alpha)
}

fn candidates(
    eigenvalues: &[f64],
    current: &Composition,
    strategy: Strategy,
    ctx: &ScoreContext,
) -> Result<Vec<Composition>> {
    Ok(match strategy {
        Strategy::Fixed | Strategy::Hdmi { .. } => Vec::new(),
        Strategy::Hierarchical => candidates_hierarchical(eigenvalues),
        Strategy::Relative => {
            let n_eff = match ctx.relative_scale {
                RelativeScale::Component => ctx.n as f64 * ctx.weight,
                RelativeScale::Total => ctx.n as f64,
            };
            vec![candidates_relative(eigenvalues, n_eff.max(2.0))?]
        }
        Strategy::BottomUp | Strategy::TopDown => {
            let mut all = upper_neighbors(current);
            all.extend(lower_neighbors(current));
            all
        }
    })
}

/// Picks the composition maximizing [`component_score`] among the strategy's
/// candidates and the current composition. Ties go to the candidate with
/// fewer parameters, then to the current one.
pub fn select_component_type(
    scatter: &SpectralDecomposition,
    current: &Composition,
    strategy: Strategy,
    ctx: &ScoreContext,
) -> Result<Composition> {
    let eigenvalues = &scatter.eigenvalues;
    if eigenvalues.len() != current.ambient() {
        return Err(Error::input("spectrum and composition dimensions differ"));
    }
    if let Strategy::Hdmi { sigma2 } = strategy {
        let p = eigenvalues.len();
        return Ok(Composition::ppca(p, hdmi_dimension(eigenvalues, sigma2)));
    }
    let prefix = PrefixSums::new(eigenvalues);
    let score = |g: &Composition| score_with(&prefix, g, ctx.n, ctx.weight, ctx.alpha);

    let mut best = current.clone();
    let mut best_score = score(current);
    let mut best_kappa = kappa_psa(current);
    for cand in candidates(eigenvalues, current, strategy, ctx)? {
        let s = score(&cand);
        let k = kappa_psa(&cand);
        if s > best_score || (s == best_score && k < best_kappa) {
            best = cand;
            best_score = s;
            best_kappa = k;
        }
    }
    Ok(best)
}
