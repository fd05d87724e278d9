//! Single-Gaussian models with piecewise-constant covariance spectra.
//!
//! A [`Composition`] lists the multiplicities of the distinct covariance
//! eigenvalues, largest first. Given the spectrum of a sample covariance the
//! maximum-likelihood fit of a given composition keeps the eigenvectors and
//! replaces every group of eigenvalues by its mean.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, SpectralDecomposition};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Ordered multiplicities `(γ₁, …, γ_d)` of a covariance spectrum.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Composition {
    parts: Vec<usize>,
}

impl Composition {
    pub fn new(parts: Vec<usize>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::input("a composition needs at least one part"));
        }
        if parts.contains(&0) {
            return Err(Error::input(format!(
                "composition parts must be positive: {parts:?}"
            )));
        }
        Ok(Self { parts })
    }

    /// `(1, …, 1)`: every eigenvalue distinct (full covariance).
    pub fn full(p: usize) -> Self {
        assert!(p > 0);
        Self { parts: vec![1; p] }
    }

    /// `(p)`: a single eigenvalue (isotropic covariance).
    pub fn spherical(p: usize) -> Self {
        assert!(p > 0);
        Self { parts: vec![p] }
    }

    /// `(1^q, p-q)`: `q` distinct leading eigenvalues over an isotropic tail.
    pub fn ppca(p: usize, q: usize) -> Self {
        assert!(q < p);
        let mut parts = vec![1; q];
        parts.push(p - q);
        Self { parts }
    }

    pub fn parts(&self) -> &[usize] {
        &self.parts
    }

    /// Number of distinct eigenvalues `d`.
    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Ambient dimension `p = Σ γ_k`.
    pub fn ambient(&self) -> usize {
        self.parts.iter().sum()
    }

    /// Cumulative sums `q_1 < … < q_d = p`.
    pub fn cumulative(&self) -> Vec<usize> {
        self.parts
            .iter()
            .scan(0, |acc, &g| {
                *acc += g;
                Some(*acc)
            })
            .collect()
    }

    /// Index ranges of the eigenvalues in each block.
    pub fn blocks(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        self.parts.iter().scan(0, |start, &g| {
            let r = *start..*start + g;
            *start += g;
            Some(r)
        })
    }

    /// Number of free parameters of a Gaussian of this type (mean included).
    pub fn kappa(&self) -> usize {
        kappa_psa(self)
    }
}

impl TryFrom<Vec<usize>> for Composition {
    type Error = Error;

    fn try_from(parts: Vec<usize>) -> Result<Self> {
        Composition::new(parts)
    }
}

impl From<Composition> for Vec<usize> {
    fn from(c: Composition) -> Self {
        c.parts
    }
}

impl fmt::Display for Composition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, g) in self.parts.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{g}")?;
        }
        write!(f, ")")
    }
}

/// Parses `"1,2,7"`, `"(1,2,7)"` or the run-length form `"1^9,55"`.
impl FromStr for Composition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let body = s.trim().trim_start_matches('(').trim_end_matches(')');
        let mut parts = Vec::new();
        for token in body.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (value, count) = match token.split_once('^') {
                Some((v, c)) => (v.trim(), c.trim()),
                None => (token, "1"),
            };
            let bad = || Error::input(format!("bad composition token {token:?} in {s:?}"));
            let value: usize = value.parse().map_err(|_| bad())?;
            let count: usize = count.parse().map_err(|_| bad())?;
            parts.extend(std::iter::repeat_n(value, count));
        }
        Composition::new(parts)
    }
}

/// `κ(γ) = p + d + (p² − Σ γ_k²)/2`.
pub fn kappa_psa(gamma: &Composition) -> usize {
    let p = gamma.ambient();
    let sq: usize = gamma.parts.iter().map(|g| g * g).sum();
    p + gamma.len() + (p * p - sq) / 2
}

fn check_length(eigenvalues: &[f64], gamma: &Composition) -> Result<()> {
    if eigenvalues.len() != gamma.ambient() {
        return Err(Error::input(format!(
            "{} eigenvalues for a composition of {}",
            eigenvalues.len(),
            gamma.ambient()
        )));
    }
    Ok(())
}

/// Mean of the eigenvalues falling in each block of `gamma`.
pub fn block_average(eigenvalues: &[f64], gamma: &Composition) -> Result<Vec<f64>> {
    check_length(eigenvalues, gamma)?;
    Ok(gamma
        .blocks()
        .map(|r| {
            let len = r.len() as f64;
            eigenvalues[r].iter().sum::<f64>() / len
        })
        .collect())
}

/// Maximum-likelihood PSA fit: block-averaged eigenvalues over the sample
/// eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct PsaEstimate {
    pub composition: Composition,
    /// One value per block, non-increasing.
    pub block_eigenvalues: Vec<f64>,
    /// Orthonormal columns, grouped by block in the order of the composition.
    pub basis: Matrix,
    pub mean: Vec<f64>,
}

impl PsaEstimate {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `Σ_k λ_k Π_k` as a dense matrix.
    pub fn covariance(&self) -> Matrix {
        let p = self.dim();
        let mut out = Matrix::zeros(p, p);
        for (r, &lambda) in self.composition.blocks().zip(&self.block_eigenvalues) {
            for j in r {
                for a in 0..p {
                    let va = lambda * self.basis[(a, j)];
                    for b in 0..p {
                        out[(a, b)] += va * self.basis[(b, j)];
                    }
                }
            }
        }
        out
    }

    /// Orthogonal projector onto block `k`.
    pub fn projector(&self, k: usize) -> Matrix {
        let p = self.dim();
        let r = self.composition.blocks().nth(k).expect("block index out of range");
        let mut out = Matrix::zeros(p, p);
        for j in r {
            for a in 0..p {
                for b in 0..p {
                    out[(a, b)] += self.basis[(a, j)] * self.basis[(b, j)];
                }
            }
        }
        out
    }

    /// `Σ_k γ_k ln λ_k`, the log-determinant of the covariance.
    pub fn log_det(&self) -> f64 {
        self.composition
            .parts()
            .iter()
            .zip(&self.block_eigenvalues)
            .map(|(&g, l)| g as f64 * l.ln())
            .sum()
    }
}

/// Fits a PSA model of type `gamma` to a decomposed scatter matrix.
pub fn psa_mle(
    scatter: &SpectralDecomposition,
    mean: &[f64],
    gamma: &Composition,
) -> Result<PsaEstimate> {
    check_length(&scatter.eigenvalues, gamma)?;
    if mean.len() != gamma.ambient() {
        return Err(Error::input("mean length does not match the composition"));
    }
    Ok(PsaEstimate {
        composition: gamma.clone(),
        block_eigenvalues: block_average(&scatter.eigenvalues, gamma)?,
        basis: scatter.eigenvectors.clone(),
        mean: mean.to_vec(),
    })
}

/// Maximized log-likelihood `−(n/2)(p ln 2π + Σ γ_k ln λ̂_k + p)`.
pub fn psa_max_loglik(eigenvalues: &[f64], gamma: &Composition, n: usize) -> Result<f64> {
    let lambdas = block_average(eigenvalues, gamma)?;
    if let Some(k) = lambdas.iter().position(|&l| !(l > 0.0)) {
        return Err(Error::Numerical(format!(
            "block {k} has non-positive eigenvalue {}",
            lambdas[k]
        )));
    }
    let p = gamma.ambient() as f64;
    let log_det: f64 = gamma
        .parts()
        .iter()
        .zip(&lambdas)
        .map(|(&g, l)| g as f64 * l.ln())
        .sum();
    Ok(-0.5 * n as f64 * (p * LN_2PI + log_det + p))
}

/// `κ(γ) ln n − 2 ln L`.
pub fn bic(gamma: &Composition, max_loglik: f64, n: usize) -> f64 {
    kappa_psa(gamma) as f64 * (n as f64).ln() - 2.0 * max_loglik
}

/// Relative eigengap below which two adjacent sample eigenvalues are better
/// modeled as equal, for an effective sample size `n`.
pub fn eigengap_threshold(n: f64) -> Result<f64> {
    if !(n >= 2.0) || !n.is_finite() {
        return Err(Error::input(format!("eigengap threshold needs n >= 2, got {n}")));
    }
    let ln_n = n.ln();
    let root = (ln_n / n).exp(); // n^{1/n}
    let sq_minus_one = (2.0 * ln_n / n).exp_m1(); // n^{2/n} - 1
    Ok(2.0 * (root * sq_minus_one.sqrt() - sq_minus_one))
}

fn relative_gaps(eigenvalues: &[f64]) -> Vec<f64> {
    eigenvalues
        .windows(2)
        .map(|w| if w[0] > 0.0 { (w[0] - w[1]) / w[0] } else { 0.0 })
        .collect()
}

fn composition_from_cuts(cuts: &[bool]) -> Composition {
    let mut parts = Vec::new();
    let mut run = 1;
    for &cut in cuts {
        if cut {
            parts.push(run);
            run = 1;
        } else {
            run += 1;
        }
    }
    parts.push(run);
    Composition { parts }
}

/// Equalizes every adjacent pair whose relative eigengap is below
/// `eigengap_threshold(n_eff)`.
pub fn candidates_relative(eigenvalues: &[f64], n_eff: f64) -> Result<Composition> {
    if eigenvalues.is_empty() {
        return Err(Error::input("empty spectrum"));
    }
    let threshold = eigengap_threshold(n_eff)?;
    let cuts: Vec<bool> = relative_gaps(eigenvalues)
        .into_iter()
        .map(|g| g >= threshold)
        .collect();
    Ok(composition_from_cuts(&cuts))
}

/// Single-linkage agglomeration of adjacent eigenvalues under the relative
/// eigengap, from `(1, …, 1)` down to `(p)`. Equal gaps merge the lower index
/// first. Returns the `p` nested compositions in merge order.
pub fn candidates_hierarchical(eigenvalues: &[f64]) -> Vec<Composition> {
    let p = eigenvalues.len();
    if p == 0 {
        return Vec::new();
    }
    let gaps = relative_gaps(eigenvalues);
    let mut order: Vec<usize> = (0..gaps.len()).collect();
    order.sort_by(|&a, &b| gaps[a].total_cmp(&gaps[b]).then(a.cmp(&b)));
    let mut cuts = vec![true; gaps.len()];
    let mut chain = Vec::with_capacity(p);
    chain.push(composition_from_cuts(&cuts));
    for j in order {
        cuts[j] = false;
        chain.push(composition_from_cuts(&cuts));
    }
    chain
}

/// Compositions obtained by splitting one block in two (`p − d` of them).
pub fn upper_neighbors(gamma: &Composition) -> Vec<Composition> {
    let mut out = Vec::with_capacity(gamma.ambient() - gamma.len());
    for (k, &g) in gamma.parts.iter().enumerate() {
        for first in 1..g {
            let mut parts = Vec::with_capacity(gamma.len() + 1);
            parts.extend_from_slice(&gamma.parts[..k]);
            parts.push(first);
            parts.push(g - first);
            parts.extend_from_slice(&gamma.parts[k + 1..]);
            out.push(Composition { parts });
        }
    }
    out
}

/// Compositions obtained by merging two adjacent blocks (`d − 1` of them).
pub fn lower_neighbors(gamma: &Composition) -> Vec<Composition> {
    (0..gamma.len().saturating_sub(1))
        .map(|k| {
            let mut parts = Vec::with_capacity(gamma.len() - 1);
            parts.extend_from_slice(&gamma.parts[..k]);
            parts.push(gamma.parts[k] + gamma.parts[k + 1]);
            parts.extend_from_slice(&gamma.parts[k + 2..]);
            Composition { parts }
        })
        .collect()
}

/// Number of leading eigenvalues `q` such that the mean of the remaining tail
/// is closest to the noise variance. Ties resolve to the smallest `q`.
pub fn hdmi_dimension(eigenvalues: &[f64], sigma2: f64) -> usize {
    let p = eigenvalues.len();
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    let mut tail_sum = 0.0;
    let mut dists = vec![0.0; p];
    for q in (0..p).rev() {
        tail_sum += eigenvalues[q];
        dists[q] = (sigma2 - tail_sum / (p - q) as f64).abs();
    }
    for (q, &d) in dists.iter().enumerate() {
        if d < best_dist {
            best_dist = d;
            best = q;
        }
    }
    best
}
