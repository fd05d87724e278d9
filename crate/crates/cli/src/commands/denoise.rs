//! `denoise`: patch-prior denoising of a grayscale PGM image.

use mpsa::datagen::add_gaussian_noise;
use mpsa::denoise::{denoise_image, encode_pgm, read_pgm, DenoiseConfig, DenoiseMethod};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::args::DenoiseArgs;
use crate::config::{parse_method, FitPlan};
use crate::error::{CliError, CliResult, WithPath};
use crate::files::{write_atomic, write_csv, write_trace};

const DEFAULT_PATCH_SIZE: usize = 8;
const DEFAULT_COMPONENTS: usize = 3;

pub fn run(args: &DenoiseArgs) -> CliResult<()> {
    let (plan, file) = FitPlan::from_flags(&args.fit)?;
    if plan.types.is_some() {
        return Err(CliError::usage("denoise selects component types through --method, not --types"));
    }
    let method = match args.method.as_ref().or(file.denoise.method.as_ref()) {
        Some(m) => parse_method(m)?,
        None => DenoiseMethod::Mpsa,
    };
    let sigma = args.sigma.or(file.denoise.sigma);
    if args.supervised && sigma.is_none() {
        return Err(CliError::usage("--supervised requires the noise level (--sigma)"));
    }
    if method == DenoiseMethod::Hdmi && sigma.is_none() {
        return Err(CliError::usage("the hdmi method requires the noise level (--sigma)"));
    }
    if let Some(s) = sigma {
        if !(s > 0.0) || !s.is_finite() {
            return Err(CliError::usage(format!("sigma must be positive, got {s}")));
        }
    }
    let patch_size = args.patch_size.or(file.denoise.patch_size).unwrap_or(DEFAULT_PATCH_SIZE);
    let n_components = args.components.or(plan.components).unwrap_or(DEFAULT_COMPONENTS);
    if patch_size == 0 || n_components == 0 {
        return Err(CliError::usage("patch size and number of components must be positive"));
    }

    let input = read_pgm(&args.input).at(&args.input)?;
    let (noisy, clean) = match args.add_noise {
        Some(level) => {
            if !(level >= 0.0) || !level.is_finite() {
                return Err(CliError::usage(format!("--add-noise must be nonnegative, got {level}")));
            }
            // A stream separate from the one seeding the fit.
            let mut rng = ChaCha8Rng::seed_from_u64(plan.config.seed ^ 0x6e6f697365);
            (add_gaussian_noise(&input, level, &mut rng), Some(input))
        }
        None => {
            let clean = match &args.clean {
                Some(path) => Some(read_pgm(path).at(path)?),
                None => None,
            };
            (input, clean)
        }
    };
    if let Some(path) = &args.noisy_out {
        write_atomic(path, &encode_pgm(&noisy.clamped()))?;
    }

    let config = DenoiseConfig {
        patch_size,
        n_components,
        method,
        fit: plan.config.clone(),
        sigma,
    };
    let out = denoise_image(&noisy, &config, clean.as_ref())?;
    write_atomic(&args.out, &encode_pgm(&out.image))?;

    let report = serde_json::to_string_pretty(&out.report).expect("reports serialize");
    match &args.report {
        Some(path) => {
            write_atomic(path, format!("{report}\n").as_bytes())?;
            let psnr = out.report.psnr.map_or(String::new(), |v| format!(", PSNR {v:.2} dB"));
            println!(
                "{}: sigma2 {:.6}, kappa {}{psnr}",
                out.report.method, out.report.sigma2, out.report.kappa
            );
        }
        None => println!("{report}"),
    }
    if let Some(path) = &args.trace {
        write_trace(path, &out.trace)?;
    }
    if let Some(path) = &args.patch_map {
        let cols = noisy.width() - patch_size + 1;
        let kappas: Vec<usize> = out.model.components.iter().map(|c| c.kappa()).collect();
        let header = ["top", "left", "component", "kappa"].map(String::from);
        let rows = out.patch_labels.iter().enumerate().map(|(k, &c)| {
            vec![
                (k / cols).to_string(),
                (k % cols).to_string(),
                (c + 1).to_string(),
                kappas[c].to_string(),
            ]
        });
        write_csv(path, &header, rows)?;
    }
    Ok(())
}
