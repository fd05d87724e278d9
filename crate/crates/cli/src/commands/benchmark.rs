//! `benchmark`: built-in density, clustering and denoising suites.
//!
//! Density suites (`mpsa10`, `mpsa100`, `full10`, `full100`, `skew100`):
//! n = 1000, C = 3, weights (0.4, 0.3, 0.3), means uniform on `[−5, 5]^p`,
//! leading eigenvalues (3, 2, 1), `λ_p/λ_1 = 0.01`. Clustering suites
//! (`clustering-mpsa10`, `clustering-mpsa50`, `clustering-full10`): leading
//! eigenvalues (10, 1, 0.1), n = 200 (1000 for p = 50), means uniform on
//! `[−1, 1]^p` for the first and zero otherwise. The `denoise` suite uses a
//! synthetic 128×128 image, σ = 30/255, 8×8 patches and C = 3. The `csv`
//! suite runs stratified cross-validation on a labeled dataset: each fold is
//! held out once, the models are fitted on the remaining folds, and the ARI
//! is measured on the held-out fold.
//!
//! Penalized log-likelihoods are reported per sample.

use mpsa::datagen::{add_gaussian_noise, cartoon_image, sample_mpsa, Distribution, MeanSpec, SyntheticSpec};
use mpsa::denoise::{denoise_image, DenoiseConfig, DenoiseMethod};
use mpsa::metrics::{ari, stratified_folds};
use mpsa::mixture::predict;
use mpsa::{Composition, FitConfig, Matrix, Strategy};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::args::BenchmarkArgs;
use crate::config::{FitPlan, TypesSpec};
use crate::error::{CliError, CliResult};
use crate::files::{read_dataset, write_csv};

const DEFAULT_REPETITIONS: usize = 10;
const DEFAULT_FOLDS: usize = 10;

/// One of the compared models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    MpsaH,
    MpsaR,
    MpsaU,
    MpsaD,
    GmmF,
    GmmS,
}

impl Model {
    pub const ALL: [Model; 6] = [Model::MpsaH, Model::MpsaR, Model::MpsaU, Model::MpsaD, Model::GmmF, Model::GmmS];

    pub fn name(self) -> &'static str {
        match self {
            Model::MpsaH => "MPSA-H",
            Model::MpsaR => "MPSA-R",
            Model::MpsaU => "MPSA-U",
            Model::MpsaD => "MPSA-D",
            Model::GmmF => "GMM-F",
            Model::GmmS => "GMM-S",
        }
    }

    fn parse(text: &str) -> CliResult<Self> {
        Model::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(text.trim()))
            .ok_or_else(|| CliError::usage(format!("unknown model {text:?}")))
    }

    /// Strategy and fixed types of this model.
    fn plan(self, base: &FitConfig) -> FitPlan {
        let (strategy, types) = match self {
            Model::MpsaH => (Strategy::Hierarchical, None),
            Model::MpsaR => (Strategy::Relative, None),
            Model::MpsaU => (Strategy::BottomUp, None),
            Model::MpsaD => (Strategy::TopDown, None),
            Model::GmmF => (Strategy::Fixed, Some(TypesSpec::Full)),
            Model::GmmS => (Strategy::Fixed, Some(TypesSpec::Spherical)),
        };
        FitPlan::with_strategy(
            FitConfig {
                strategy,
                ..base.clone()
            },
            types,
        )
    }

    fn denoise_method(self) -> DenoiseMethod {
        match self {
            Model::GmmF => DenoiseMethod::GmmFull,
            Model::GmmS => DenoiseMethod::GmmSpherical,
            _ => DenoiseMethod::Mpsa,
        }
    }
}

/// Metrics of one fit; absent entries do not apply to the suite.
#[derive(Debug, Clone, Copy, Default)]
struct Run {
    penalized_ll: Option<f64>,
    ari: Option<f64>,
    kappa: f64,
    psnr: Option<f64>,
}

/// Mean and sample standard deviation; zero deviation for one value.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn synthetic_spec(suite: &str) -> Option<SyntheticSpec> {
    let mpsa = |p: usize| -> Vec<Composition> {
        [vec![1, p - 1], vec![1, 2, p - 3], vec![1, 2, 4, p - 7]]
            .into_iter()
            .map(|v| Composition::new(v).expect("valid composition"))
            .collect()
    };
    let full = |p: usize| vec![Composition::full(p); 3];
    let (n, types, bound, lambda1) = match suite {
        "mpsa10" => (1000, mpsa(10), 5.0, [3.0, 2.0, 1.0]),
        "mpsa100" => (1000, mpsa(100), 5.0, [3.0, 2.0, 1.0]),
        "full10" => (1000, full(10), 5.0, [3.0, 2.0, 1.0]),
        "full100" | "skew100" => (1000, full(100), 5.0, [3.0, 2.0, 1.0]),
        "clustering-mpsa10" => (200, mpsa(10), 1.0, [10.0, 1.0, 0.1]),
        "clustering-mpsa50" => (1000, mpsa(50), 0.0, [10.0, 1.0, 0.1]),
        "clustering-full10" => (200, full(10), 0.0, [10.0, 1.0, 0.1]),
        _ => return None,
    };
    let mut spec = SyntheticSpec::uniform(n, bound, &types, 1.0, 0.01);
    spec.weights = vec![0.4, 0.3, 0.3];
    spec.means = MeanSpec::Uniform(bound);
    for (s, l) in spec.spectra.iter_mut().zip(lambda1) {
        s.lambda1 = l;
    }
    if suite == "skew100" {
        spec.distribution = Distribution::SkewNormal(vec![1.0; 100]);
    }
    Some(spec)
}

fn fit_once(model: Model, base: &FitConfig, x: &Matrix, c: usize) -> CliResult<(mpsa::MpsaModel, f64)> {
    let (fitted, trace) = model.plan(base).fit(x, c)?;
    let last = trace.last().expect("a fit records at least one iteration");
    Ok((fitted, last.penalized_loglik / x.rows() as f64))
}

fn synthetic_runs(spec: &SyntheticSpec, models: &[Model], base: &FitConfig, reps: usize) -> CliResult<Vec<Vec<Run>>> {
    let mut out = vec![Vec::with_capacity(reps); models.len()];
    for r in 0..reps {
        let seed = base.seed.wrapping_add(r as u64);
        let data = sample_mpsa(spec, &mut ChaCha8Rng::seed_from_u64(seed))?;
        let config = FitConfig { seed, ..base.clone() };
        for (k, &m) in models.iter().enumerate() {
            let (fitted, pll) = fit_once(m, &config, &data.x, spec.weights.len())?;
            out[k].push(Run {
                penalized_ll: Some(pll),
                ari: Some(ari(&data.labels, &predict(&data.x, &fitted)?)?),
                kappa: fitted.kappa() as f64,
                psnr: None,
            });
        }
    }
    Ok(out)
}

fn denoise_runs(models: &[Model], base: &FitConfig, reps: usize) -> CliResult<Vec<Vec<Run>>> {
    let mut out = vec![Vec::with_capacity(reps); models.len()];
    for r in 0..reps {
        let seed = base.seed.wrapping_add(r as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let clean = cartoon_image(128, 128, &mut rng);
        let noisy = add_gaussian_noise(&clean, 30.0 / 255.0, &mut rng);
        for (k, &m) in models.iter().enumerate() {
            let config = DenoiseConfig {
                patch_size: 8,
                n_components: 3,
                method: m.denoise_method(),
                fit: FitConfig { seed, ..m.plan(base).config },
                sigma: None,
            };
            let result = denoise_image(&noisy, &config, Some(&clean))?;
            let n_patches = (128 - 8 + 1) * (128 - 8 + 1);
            out[k].push(Run {
                penalized_ll: Some(result.report.penalized_loglik / n_patches as f64),
                ari: None,
                kappa: result.report.kappa as f64,
                psnr: result.report.psnr,
            });
        }
    }
    Ok(out)
}

fn select_rows(x: &Matrix, rows: &[usize]) -> Matrix {
    let data = rows.iter().flat_map(|&i| x.row(i).iter().copied()).collect();
    Matrix::from_row_major(rows.len(), x.cols(), data).expect("row selection keeps the shape")
}

fn csv_runs(args: &BenchmarkArgs, models: &[Model], base: &FitConfig) -> CliResult<Vec<Vec<Run>>> {
    let path = args
        .data
        .as_ref()
        .ok_or_else(|| CliError::usage("the csv suite needs --data"))?;
    let data = read_dataset(path)?;
    let labels = data
        .labels
        .clone()
        .ok_or_else(|| CliError::data(format!("{}: the csv suite needs a label column", path.display())))?;
    let c = args.components.or(data.n_classes()).unwrap_or(1);
    let k = args.repetitions.unwrap_or(DEFAULT_FOLDS);
    let folds = stratified_folds(&labels, k, &mut ChaCha8Rng::seed_from_u64(base.seed))?;
    let mut out = vec![Vec::with_capacity(k); models.len()];
    for f in 0..k {
        let train: Vec<usize> = (0..labels.len()).filter(|&i| folds[i] != f).collect();
        let test: Vec<usize> = (0..labels.len()).filter(|&i| folds[i] == f).collect();
        let (x_train, x_test) = (select_rows(&data.x, &train), select_rows(&data.x, &test));
        let truth: Vec<usize> = test.iter().map(|&i| labels[i]).collect();
        for (j, &m) in models.iter().enumerate() {
            let (fitted, pll) = fit_once(m, base, &x_train, c)?;
            out[j].push(Run {
                penalized_ll: Some(pll),
                ari: Some(ari(&truth, &predict(&x_test, &fitted)?)?),
                kappa: fitted.kappa() as f64,
                psnr: None,
            });
        }
    }
    Ok(out)
}

fn summary_row(suite: &str, model: Model, runs: &[Run]) -> Vec<String> {
    let stat = |f: &dyn Fn(&Run) -> Option<f64>| -> (String, String) {
        let v: Vec<f64> = runs.iter().filter_map(f).collect();
        if v.len() < runs.len() || v.is_empty() {
            return (String::new(), String::new());
        }
        let (m, s) = mean_std(&v);
        (m.to_string(), s.to_string())
    };
    let (pll, pll_sd) = stat(&|r| r.penalized_ll);
    let (a, a_sd) = stat(&|r| r.ari);
    let (ps, ps_sd) = stat(&|r| r.psnr);
    let (kappa, _) = stat(&|r| Some(r.kappa));
    vec![
        suite.to_string(),
        model.name().to_string(),
        runs.len().to_string(),
        pll,
        pll_sd,
        a,
        a_sd,
        kappa,
        ps,
        ps_sd,
    ]
}

pub const HEADER: [&str; 10] = [
    "suite",
    "model",
    "repetitions",
    "penalized_ll_mean",
    "penalized_ll_std",
    "ari_mean",
    "ari_std",
    "kappa_mean",
    "psnr_mean",
    "psnr_std",
];

pub fn run(args: &BenchmarkArgs) -> CliResult<()> {
    let (plan, _) = FitPlan::from_flags(&args.fit)?;
    if args.fit.strategy.is_some() || plan.types.is_some() {
        return Err(CliError::usage("benchmark models fix their own strategy and types; use --models"));
    }
    let models = match &args.models {
        Some(list) => list.split(',').map(Model::parse).collect::<CliResult<Vec<_>>>()?,
        None => Model::ALL.to_vec(),
    };
    if models.is_empty() {
        return Err(CliError::usage("no models selected"));
    }
    let reps = args.repetitions.unwrap_or(DEFAULT_REPETITIONS);
    if reps == 0 {
        return Err(CliError::usage("repetitions must be positive"));
    }
    let suite = args.suite.as_str();
    let runs = match suite {
        "denoise" => denoise_runs(&models, &plan.config, reps)?,
        "csv" => csv_runs(args, &models, &plan.config)?,
        _ => {
            let spec = synthetic_spec(suite).ok_or_else(|| CliError::usage(format!("unknown suite {suite:?}")))?;
            synthetic_runs(&spec, &models, &plan.config, reps)?
        }
    };
    let rows: Vec<Vec<String>> = models.iter().zip(&runs).map(|(&m, r)| summary_row(suite, m, r)).collect();
    for row in &rows {
        println!("{}", row.join(","));
    }
    write_csv(&args.out, &HEADER.map(String::from), rows.into_iter())
}
