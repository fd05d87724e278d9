//! Patch-based image denoising with a mixture prior.
//!
//! Every overlapping `s×s` patch of the noisy image is a sample in `R^{s²}`
//! (row-major within the patch). A mixture is fitted to the patches, each
//! patch is replaced by its posterior-weighted shrinkage estimate, and pixels
//! are rebuilt by averaging all patch estimates that cover them.

mod pgm;

pub use pgm::{encode_pgm, parse_pgm, read_pgm, write_pgm};

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::metrics::psnr;
use crate::mixture::{cpem_fit, e_step, em_fit, predict, FitConfig, FitTrace, MpsaModel, Strategy};
use crate::psa::Composition;

/// Grayscale image with pixels in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::input("image dimensions must be positive"));
        }
        if pixels.len() != height * width {
            return Err(Error::input(format!(
                "{} pixels for a {height}x{width} image",
                pixels.len()
            )));
        }
        Ok(Self { height, width, pixels })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pixels[i * self.width + j]
    }

    /// Top-left `height×width` window starting at `(top, left)`.
    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<Self> {
        if top + height > self.height || left + width > self.width {
            return Err(Error::input("crop window exceeds the image"));
        }
        let px = (top..top + height)
            .flat_map(|i| self.pixels[i * self.width + left..i * self.width + left + width].iter().copied())
            .collect();
        Self::new(height, width, px)
    }

    pub fn clamped(&self) -> Self {
        Self {
            height: self.height,
            width: self.width,
            pixels: self.pixels.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        }
    }
}

/// All overlapping square patches of an image.
#[derive(Debug, Clone)]
pub struct PatchSet {
    pub size: usize,
    /// One vectorized patch per row.
    pub data: Matrix,
    /// Top-left corner `(row, column)` of each patch.
    pub origins: Vec<(usize, usize)>,
    pub image_height: usize,
    pub image_width: usize,
}

/// Extracts every `s×s` patch with stride one.
pub fn extract_patches(img: &GrayImage, s: usize) -> Result<PatchSet> {
    if s == 0 || s > img.height.min(img.width) {
        return Err(Error::input(format!(
            "patch size {s} does not fit a {}x{} image",
            img.height, img.width
        )));
    }
    let rows = img.height - s + 1;
    let cols = img.width - s + 1;
    let mut data = Vec::with_capacity(rows * cols * s * s);
    let mut origins = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            for a in 0..s {
                let start = (i + a) * img.width + j;
                data.extend_from_slice(&img.pixels[start..start + s]);
            }
            origins.push((i, j));
        }
    }
    Ok(PatchSet {
        size: s,
        data: Matrix::from_row_major(rows * cols, s * s, data)?,
        origins,
        image_height: img.height,
        image_width: img.width,
    })
}

/// `σ² = Σ_c π_c λ_{c,d_c}`.
pub fn estimate_noise(model: &MpsaModel) -> f64 {
    model
        .components
        .iter()
        .map(|c| c.weight * c.smallest_eigenvalue())
        .sum()
}

/// Denoised patches and the number of `(component, block)` shrinkage
/// factors that had to be clamped into `[0, 1]`.
#[derive(Debug, Clone)]
pub struct DenoisedPatches {
    pub data: Matrix,
    pub clamped_blocks: usize,
}

/// Posterior-weighted shrinkage:
/// `x̂ = Σ_c w_c (μ_c + Σ_{k<d_c} clamp(1 − σ²/λ_ck, 0, 1) Π_ck (x − μ_c))`.
pub fn denoise_patches(patches: &Matrix, model: &MpsaModel, sigma2: f64) -> Result<DenoisedPatches> {
    if !(sigma2 >= 0.0) {
        return Err(Error::input("noise variance must be nonnegative"));
    }
    let t = e_step(patches, model)?;
    let p = patches.cols();
    let mut clamped_blocks = 0;
    // Per component: mean, and (direction, factor) for every kept direction.
    type Shrinker<'a> = (&'a [f64], Vec<(Vec<f64>, f64)>);
    let shrinkers: Vec<Shrinker> = model
        .components
        .iter()
        .map(|comp| {
            let est = &comp.estimate;
            let d = est.composition.len();
            let mut dirs = Vec::new();
            for (k, r) in est.composition.blocks().enumerate().take(d - 1) {
                let raw = 1.0 - sigma2 / est.block_eigenvalues[k];
                let f = raw.clamp(0.0, 1.0);
                if f != raw {
                    clamped_blocks += 1;
                }
                if f > 0.0 {
                    for j in r {
                        dirs.push((est.basis.column(j), f));
                    }
                }
            }
            (comp.mean(), dirs)
        })
        .collect();

    let mut out = Matrix::zeros(patches.rows(), p);
    let mut centered = vec![0.0; p];
    for (i, x) in patches.iter_rows().enumerate() {
        let row = out.row_mut(i);
        for (c, (mean, dirs)) in shrinkers.iter().enumerate() {
            let w = t.get(c, i);
            if w == 0.0 {
                continue;
            }
            for ((z, xi), m) in centered.iter_mut().zip(x).zip(mean.iter()) {
                *z = xi - m;
            }
            for (r, m) in row.iter_mut().zip(mean.iter()) {
                *r += w * m;
            }
            for (v, f) in dirs {
                let coef = w * f * dot(v, &centered);
                for (r, vj) in row.iter_mut().zip(v) {
                    *r += coef * vj;
                }
            }
        }
    }
    Ok(DenoisedPatches {
        data: out,
        clamped_blocks,
    })
}

/// Averages overlapping patch estimates back into an image clamped to
/// `[0, 1]`.
pub fn reassemble(patches: &Matrix, origins: &[(usize, usize)], s: usize, height: usize, width: usize) -> Result<GrayImage> {
    if patches.rows() != origins.len() || patches.cols() != s * s {
        return Err(Error::input("patches and origins disagree"));
    }
    let mut sum = vec![0.0; height * width];
    let mut count = vec![0u32; height * width];
    for (row, &(i, j)) in patches.iter_rows().zip(origins) {
        if i + s > height || j + s > width {
            return Err(Error::input(format!("patch at ({i}, {j}) exceeds the image")));
        }
        for a in 0..s {
            for b in 0..s {
                let k = (i + a) * width + j + b;
                sum[k] += row[a * s + b];
                count[k] += 1;
            }
        }
    }
    if let Some(k) = count.iter().position(|&c| c == 0) {
        return Err(Error::Numerical(format!(
            "pixel ({}, {}) is covered by no patch",
            k / width,
            k % width
        )));
    }
    let px = sum
        .iter()
        .zip(&count)
        .map(|(s, &c)| (s / f64::from(c)).clamp(0.0, 1.0))
        .collect();
    GrayImage::new(height, width, px)
}

/// Which prior is fitted to the patches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DenoiseMethod {
    /// Componentwise penalized EM with the strategy of the fit config.
    Mpsa,
    /// Full-covariance GMM.
    GmmFull,
    /// Isotropic GMM.
    GmmSpherical,
    /// `(1^{q_c}, p − q_c)` types matched to the known noise variance.
    Hdmi,
}

impl DenoiseMethod {
    pub fn name(&self) -> &'static str {
        match self {
            DenoiseMethod::Mpsa => "mpsa",
            DenoiseMethod::GmmFull => "gmm-full",
            DenoiseMethod::GmmSpherical => "gmm-spherical",
            DenoiseMethod::Hdmi => "hdmi",
        }
    }
}

#[derive(Debug, Clone)]
pub struct DenoiseConfig {
    pub patch_size: usize,
    pub n_components: usize,
    pub method: DenoiseMethod,
    pub fit: FitConfig,
    /// Known noise standard deviation. When absent the variance is estimated
    /// from the fitted model.
    pub sigma: Option<f64>,
}

fn serialize_psnr<S: Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(x) if x.is_infinite() => s.serialize_str("inf"),
        Some(x) => s.serialize_f64(*x),
        None => s.serialize_none(),
    }
}

/// Summary of one denoising run.
#[derive(Debug, Clone, Serialize)]
pub struct DenoiseReport {
    pub method: String,
    pub patch_size: usize,
    pub n_components: usize,
    pub sigma2: f64,
    pub sigma2_estimated: bool,
    pub compositions: Vec<Composition>,
    pub kappa: usize,
    pub iterations: usize,
    pub converged: bool,
    pub penalized_loglik: f64,
    pub clamped_blocks: usize,
    #[serde(serialize_with = "serialize_psnr")]
    pub psnr: Option<f64>,
    #[serde(serialize_with = "serialize_psnr")]
    pub noisy_psnr: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct DenoiseOutput {
    pub image: GrayImage,
    pub report: DenoiseReport,
    pub model: MpsaModel,
    pub trace: FitTrace,
    /// Most likely component of each patch, in patch order.
    pub patch_labels: Vec<usize>,
}

/// Extract, fit, shrink and reassemble; compares against `clean` when given.
pub fn denoise_image(noisy: &GrayImage, config: &DenoiseConfig, clean: Option<&GrayImage>) -> Result<DenoiseOutput> {
    if let Some(c) = clean {
        if (c.height, c.width) != (noisy.height, noisy.width) {
            return Err(Error::input("clean and noisy images differ in size"));
        }
    }
    if let Some(sigma) = config.sigma {
        if !(sigma >= 0.0) {
            return Err(Error::input("sigma must be nonnegative"));
        }
    }
    let patches = extract_patches(noisy, config.patch_size)?;
    let p = patches.data.cols();
    let c = config.n_components;
    let (model, trace) = match config.method {
        DenoiseMethod::Mpsa => cpem_fit(&patches.data, c, &config.fit)?,
        DenoiseMethod::GmmFull => em_fit(&patches.data, c, &vec![Composition::full(p); c], &config.fit)?,
        DenoiseMethod::GmmSpherical => {
            em_fit(&patches.data, c, &vec![Composition::spherical(p); c], &config.fit)?
        }
        DenoiseMethod::Hdmi => {
            let sigma = config
                .sigma
                .ok_or_else(|| Error::input("the HDMI baseline needs the noise level"))?;
            let fit = FitConfig {
                strategy: Strategy::Hdmi { sigma2: sigma * sigma },
                ..config.fit.clone()
            };
            cpem_fit(&patches.data, c, &fit)?
        }
    };
    let (sigma2, estimated) = match config.sigma {
        Some(s) => (s * s, false),
        None => (estimate_noise(&model), true),
    };
    let denoised = denoise_patches(&patches.data, &model, sigma2)?;
    let image = reassemble(&denoised.data, &patches.origins, patches.size, noisy.height, noisy.width)?;
    let last = trace.last().expect("fits record every iteration");
    let report = DenoiseReport {
        method: config.method.name().to_string(),
        patch_size: config.patch_size,
        n_components: c,
        sigma2,
        sigma2_estimated: estimated,
        compositions: model.compositions(),
        kappa: model.kappa(),
        iterations: trace.records.len(),
        converged: trace.converged,
        penalized_loglik: last.penalized_loglik,
        clamped_blocks: denoised.clamped_blocks,
        psnr: clean.map(|c| psnr(c.pixels(), image.pixels())).transpose()?,
        noisy_psnr: clean.map(|c| psnr(c.pixels(), noisy.pixels())).transpose()?,
    };
    let patch_labels = predict(&patches.data, &model)?;
    Ok(DenoiseOutput {
        image,
        report,
        model,
        trace,
        patch_labels,
    })
}
