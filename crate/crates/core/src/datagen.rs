//! Reproducible synthetic data: random MPSA models, their samples, a
//! skew-normal variant and a procedural test image.
//!
//! All generators draw from an explicitly passed [`ChaCha8Rng`]. Normal
//! variates use the Box–Muller transform on two consecutive uniforms, keeping
//! only the cosine branch, so every normal consumes exactly two uniforms.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::denoise::GrayImage;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, dot, Matrix};
use crate::mixture::{MpsaModel, PsaComponent};
use crate::psa::{Composition, PsaEstimate};

/// One standard normal variate.
pub fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // 1 − u lies in (0, 1], keeping the logarithm finite.
    let u1 = 1.0 - rng.random::<f64>();
    let u2 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Haar-distributed orthogonal matrix: Gram–Schmidt on a Gaussian matrix,
/// which yields the QR factor with a positive diagonal in `R`.
pub fn haar_orthogonal(p: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let mut cols: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..p).map(|_| standard_normal(rng)).collect())
        .collect();
    for j in 0..p {
        for k in 0..j {
            let (done, rest) = cols.split_at_mut(j);
            let proj = dot(&done[k], &rest[0]);
            for (v, q) in rest[0].iter_mut().zip(&done[k]) {
                *v -= proj * q;
            }
        }
        let norm = dot(&cols[j], &cols[j]).sqrt();
        for v in &mut cols[j] {
            *v /= norm;
        }
    }
    let mut q = Matrix::zeros(p, p);
    for (j, col) in cols.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            q[(i, j)] = v;
        }
    }
    q
}

/// Piecewise-constant spectrum with a constant relative gap between blocks.
/// Exactly one of `snr` (`λ_p / λ_1`) and `delta` must be set.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSpec {
    pub composition: Composition,
    pub lambda1: f64,
    pub snr: Option<f64>,
    pub delta: Option<f64>,
}

impl SpectrumSpec {
    /// Relative gap between consecutive blocks. With a single block the
    /// gap is irrelevant and zero is returned.
    pub fn gap(&self) -> Result<f64> {
        if !(self.lambda1 > 0.0) || !self.lambda1.is_finite() {
            return Err(Error::input("lambda1 must be positive"));
        }
        let d = self.composition.len();
        match (self.snr, self.delta) {
            (Some(_), Some(_)) | (None, None) => {
                Err(Error::input("exactly one of snr and delta must be given"))
            }
            (Some(snr), None) => {
                if !(snr > 0.0 && snr <= 1.0) {
                    return Err(Error::input(format!("snr {snr} outside (0, 1]")));
                }
                Ok(if d == 1 { 0.0 } else { 1.0 - snr.powf(1.0 / (d - 1) as f64) })
            }
            (None, Some(delta)) => {
                if !(delta > 0.0 && delta < 1.0) {
                    return Err(Error::input(format!("delta {delta} outside (0, 1)")));
                }
                Ok(delta)
            }
        }
    }

    /// One eigenvalue per block.
    pub fn block_eigenvalues(&self) -> Result<Vec<f64>> {
        let ratio = 1.0 - self.gap()?;
        let mut out = Vec::with_capacity(self.composition.len());
        let mut l = self.lambda1;
        for _ in 0..self.composition.len() {
            out.push(l);
            l *= ratio;
        }
        Ok(out)
    }
}

/// Full descending spectrum of length `p`.
pub fn build_spectrum(spec: &SpectrumSpec) -> Result<Vec<f64>> {
    let blocks = spec.block_eigenvalues()?;
    Ok(spec
        .composition
        .parts()
        .iter()
        .zip(&blocks)
        .flat_map(|(&g, &l)| std::iter::repeat_n(l, g))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeanSpec {
    /// Means drawn uniformly from `[−b, b]^p`.
    Uniform(f64),
    Explicit(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Distribution {
    Gaussian,
    /// Skew-normal with the given per-coordinate shape vector.
    SkewNormal(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub weights: Vec<f64>,
    pub means: MeanSpec,
    pub spectra: Vec<SpectrumSpec>,
    pub distribution: Distribution,
}

impl SyntheticSpec {
    /// Equal weights, uniform means and a common `λ₁` and `snr`.
    pub fn uniform(n: usize, mean_bound: f64, types: &[Composition], lambda1: f64, snr: f64) -> Self {
        let c = types.len();
        Self {
            n,
            weights: vec![1.0 / c as f64; c],
            means: MeanSpec::Uniform(mean_bound),
            spectra: types
                .iter()
                .map(|g| SpectrumSpec {
                    composition: g.clone(),
                    lambda1,
                    snr: Some(snr),
                    delta: None,
                })
                .collect(),
            distribution: Distribution::Gaussian,
        }
    }

    pub fn dim(&self) -> usize {
        self.spectra.first().map_or(0, |s| s.composition.ambient())
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.weights.len();
        if c == 0 || self.spectra.len() != c {
            return Err(Error::input(format!(
                "{c} weights for {} spectra",
                self.spectra.len()
            )));
        }
        if self.n == 0 {
            return Err(Error::input("n must be positive"));
        }
        if self.weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::input("weights must be positive"));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::input(format!("weights sum to {total}, expected 1")));
        }
        let p = self.dim();
        if self.spectra.iter().any(|s| s.composition.ambient() != p) {
            return Err(Error::input("all compositions must share the same dimension"));
        }
        for s in &self.spectra {
            s.gap()?;
        }
        match &self.means {
            MeanSpec::Uniform(b) if !(*b >= 0.0) => {
                return Err(Error::input("mean bound must be nonnegative"));
            }
            MeanSpec::Explicit(m) if m.len() != c || m.iter().any(|v| v.len() != p) => {
                return Err(Error::input(format!("expected {c} means of length {p}")));
            }
            _ => {}
        }
        if let Distribution::SkewNormal(shape) = &self.distribution {
            if shape.len() != p {
                return Err(Error::input(format!("shape vector must have length {p}")));
            }
        }
        Ok(())
    }
}

/// Draws from a multivariate skew-normal distribution through its selection
/// representation: with `ω = diag(Ω)^{1/2}`, `Ω̄ = ω⁻¹Ωω⁻¹` and
/// `δ = Ω̄α / √(1 + αᵀΩ̄α)`, the pair `(x₀, x₁)` is jointly normal with unit
/// variance, covariance `Ω̄` and cross-covariance `δ`; the output is
/// `μ + ω x₁` when `x₀ > 0` and `μ − ω x₁` otherwise.
#[derive(Debug, Clone)]
pub struct SkewNormal {
    mean: Vec<f64>,
    scale: Vec<f64>,
    delta: Vec<f64>,
    chol: Matrix,
}

impl SkewNormal {
    pub fn new(mean: &[f64], covariance: &Matrix, shape: &[f64]) -> Result<Self> {
        let p = mean.len();
        if covariance.rows() != p || covariance.cols() != p || shape.len() != p {
            return Err(Error::input("skew-normal dimensions disagree"));
        }
        let scale: Vec<f64> = (0..p).map(|i| covariance[(i, i)].sqrt()).collect();
        if scale.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::input("covariance diagonal must be positive"));
        }
        let mut corr = Matrix::zeros(p, p);
        for i in 0..p {
            for j in 0..p {
                corr[(i, j)] = covariance[(i, j)] / (scale[i] * scale[j]);
            }
        }
        let ca = corr.mat_vec(shape);
        let norm = (1.0 + dot(shape, &ca)).sqrt();
        let delta: Vec<f64> = ca.iter().map(|v| v / norm).collect();
        let mut cond = corr;
        for i in 0..p {
            for j in 0..p {
                cond[(i, j)] -= delta[i] * delta[j];
            }
        }
        Ok(Self {
            mean: mean.to_vec(),
            scale,
            delta,
            chol: cholesky(&cond)?,
        })
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let p = self.mean.len();
        let x0 = standard_normal(rng);
        let w: Vec<f64> = (0..p).map(|_| standard_normal(rng)).collect();
        let sign = if x0 > 0.0 { 1.0 } else { -1.0 };
        (0..p)
            .map(|i| {
                let lw: f64 = (0..=i).map(|j| self.chol[(i, j)] * w[j]).sum();
                self.mean[i] + sign * self.scale[i] * (self.delta[i] * x0 + lw)
            })
            .collect()
    }
}

/// One skew-normal draw; see [`SkewNormal`].
pub fn sample_skew(mean: &[f64], covariance: &Matrix, shape: &[f64], rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    Ok(SkewNormal::new(mean, covariance, shape)?.sample(rng))
}

/// A sampled dataset with its generating model.
#[derive(Debug, Clone)]
pub struct Sample {
    /// `n×p`.
    pub x: Matrix,
    /// 0-based component of each sample.
    pub labels: Vec<usize>,
    pub truth: MpsaModel,
}

/// Draws a random MPSA model from `spec` and then `n` samples from it.
///
/// Stream order: per component, the mean (when drawn) and then its
/// orthogonal basis; per sample, one uniform for the label and then the
/// normals of the observation.
pub fn sample_mpsa(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Result<Sample> {
    spec.validate()?;
    let p = spec.dim();
    let mut components = Vec::with_capacity(spec.weights.len());
    for (c, (s, &w)) in spec.spectra.iter().zip(&spec.weights).enumerate() {
        let mean = match &spec.means {
            MeanSpec::Uniform(b) => (0..p).map(|_| rng.random_range(-1.0..=1.0) * b).collect(),
            MeanSpec::Explicit(m) => m[c].clone(),
        };
        components.push(PsaComponent {
            weight: w,
            estimate: PsaEstimate {
                composition: s.composition.clone(),
                block_eigenvalues: s.block_eigenvalues()?,
                basis: haar_orthogonal(p, rng),
                mean,
            },
        });
    }
    let truth = MpsaModel::new(components, 0.0)?;

    let skew = match &spec.distribution {
        Distribution::Gaussian => None,
        Distribution::SkewNormal(shape) => Some(
            truth
                .components
                .iter()
                .map(|c| SkewNormal::new(c.mean(), &c.estimate.covariance(), shape))
                .collect::<Result<Vec<_>>>()?,
        ),
    };
    let roots: Vec<Vec<f64>> = spec
        .spectra
        .iter()
        .map(|s| build_spectrum(s).map(|l| l.into_iter().map(f64::sqrt).collect()))
        .collect::<Result<_>>()?;

    let mut data = Vec::with_capacity(spec.n * p);
    let mut labels = Vec::with_capacity(spec.n);
    let mut z = vec![0.0; p];
    for _ in 0..spec.n {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut c = spec.weights.len() - 1;
        for (k, &w) in spec.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                c = k;
                break;
            }
        }
        labels.push(c);
        if let Some(sk) = &skew {
            data.extend(sk[c].sample(rng));
            continue;
        }
        let comp = &truth.components[c];
        for (zj, r) in z.iter_mut().zip(&roots[c]) {
            *zj = r * standard_normal(rng);
        }
        data.extend((0..p).map(|a| comp.mean()[a] + dot(comp.estimate.basis.row(a), &z)));
    }
    Ok(Sample {
        x: Matrix::from_row_major(spec.n, p, data)?,
        labels,
        truth,
    })
}

/// Adds i.i.d. `N(0, σ²)` noise to every pixel, without clamping.
pub fn add_gaussian_noise(img: &GrayImage, sigma: f64, rng: &mut ChaCha8Rng) -> GrayImage {
    let pixels = img.pixels().iter().map(|&v| v + sigma * standard_normal(rng)).collect();
    GrayImage::new(img.height(), img.width(), pixels).expect("same dimensions")
}

/// Procedural cartoon-like test image: a smooth background with flat-shaded
/// ellipses and rectangles outlined in dark ink.
pub fn cartoon_image(height: usize, width: usize, rng: &mut ChaCha8Rng) -> GrayImage {
    let (h, w) = (height as f64, width as f64);
    let g0: f64 = rng.random_range(0.55..0.8);
    let gy: f64 = rng.random_range(-0.25..0.25);
    let gx: f64 = rng.random_range(-0.15..0.15);
    let mut px: Vec<f64> = (0..height * width)
        .map(|k| {
            let (i, j) = ((k / width) as f64 / h, (k % width) as f64 / w);
            g0 + gy * (i - 0.5) + gx * (j - 0.5)
        })
        .collect();

    enum Shape {
        Ellipse { cy: f64, cx: f64, ry: f64, rx: f64 },
        Rect { y0: f64, x0: f64, y1: f64, x1: f64 },
    }
    let n_shapes = 7;
    for s in 0..n_shapes {
        let shade: f64 = rng.random_range(0.15..0.95);
        let shape = if s % 3 == 2 {
            let y0 = rng.random_range(0.0..0.8) * h;
            let x0 = rng.random_range(0.0..0.8) * w;
            Shape::Rect {
                y0,
                x0,
                y1: y0 + rng.random_range(0.1..0.35) * h,
                x1: x0 + rng.random_range(0.1..0.35) * w,
            }
        } else {
            Shape::Ellipse {
                cy: rng.random_range(0.1..0.9) * h,
                cx: rng.random_range(0.1..0.9) * w,
                ry: rng.random_range(0.08..0.25) * h,
                rx: rng.random_range(0.08..0.25) * w,
            }
        };
        let ink = 1.5;
        for i in 0..height {
            for j in 0..width {
                let (y, x) = (i as f64 + 0.5, j as f64 + 0.5);
                // Signed distance in pixels, negative inside.
                let sd = match shape {
                    Shape::Ellipse { cy, cx, ry, rx } => {
                        let r = (((y - cy) / ry).powi(2) + ((x - cx) / rx).powi(2)).sqrt();
                        (r - 1.0) * ry.min(rx)
                    }
                    Shape::Rect { y0, x0, y1, x1 } => {
                        let dy = (y0 - y).max(y - y1);
                        let dx = (x0 - x).max(x - x1);
                        dy.max(dx)
                    }
                };
                let k = i * width + j;
                if sd.abs() <= ink {
                    px[k] = 0.08;
                } else if sd < 0.0 {
                    px[k] = shade;
                }
            }
        }
    }
    GrayImage::new(height, width, px.into_iter().map(|v| v.clamp(0.0, 1.0)).collect())
        .expect("dimensions match")
}
