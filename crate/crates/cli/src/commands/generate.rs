//! `generate`: sample a dataset from a TOML specification.
//!
//! ```toml
//! n = 1000
//! types = ["1,1", "2", "2"]
//! weights = [0.4, 0.3, 0.3]
//! mean_bound = 8.0
//! lambda1 = [1.0, 0.5, 0.1]
//! snr = 0.01
//! distribution = "gaussian"
//! ```
//!
//! `weights` defaults to equal weights; `means` (one row per component) may
//! replace `mean_bound`; `lambda1`, `snr`, `delta` and `skew_shape` accept a
//! single value or one value per component (per coordinate for
//! `skew_shape`). `distribution = "skew-normal"` uses `skew_shape`, default
//! 1.

use std::path::{Path, PathBuf};

use mpsa::datagen::{sample_mpsa, Distribution, MeanSpec, SpectrumSpec, SyntheticSpec};
use mpsa::mixture::serialize;
use mpsa::Composition;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::args::GenerateArgs;
use crate::error::{CliError, CliResult};
use crate::files::{read_text, write_atomic, write_dataset};

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    fn expand(&self, field: &str, len: usize) -> CliResult<Vec<f64>> {
        match self {
            OneOrMany::One(v) => Ok(vec![*v; len]),
            OneOrMany::Many(v) if v.len() == len => Ok(v.clone()),
            OneOrMany::Many(v) => Err(CliError::usage(format!(
                "{field}: expected 1 or {len} values, got {}",
                v.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub n: usize,
    pub types: Vec<String>,
    pub weights: Option<Vec<f64>>,
    pub mean_bound: Option<f64>,
    pub means: Option<Vec<Vec<f64>>>,
    pub lambda1: OneOrMany,
    pub snr: Option<OneOrMany>,
    pub delta: Option<OneOrMany>,
    pub distribution: Option<String>,
    pub skew_shape: Option<OneOrMany>,
    pub seed: Option<u64>,
}

impl SpecFile {
    pub fn parse(text: &str, origin: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::usage(format!("{origin}: {}", e.to_string().trim_end())))
    }

    /// Checks every field and builds the sampler specification.
    pub fn to_spec(&self) -> CliResult<SyntheticSpec> {
        let c = self.types.len();
        if c == 0 {
            return Err(CliError::usage("types: at least one component is required"));
        }
        let types = self
            .types
            .iter()
            .enumerate()
            .map(|(k, t)| t.parse::<Composition>().map_err(|e| CliError::usage(format!("types[{k}]: {e}"))))
            .collect::<CliResult<Vec<_>>>()?;
        let p = types[0].ambient();
        if let Some(k) = types.iter().position(|g| g.ambient() != p) {
            return Err(CliError::usage(format!(
                "types[{k}]: sums to {}, types[0] sums to {p}",
                types[k].ambient()
            )));
        }
        let weights = self.weights.clone().unwrap_or_else(|| vec![1.0 / c as f64; c]);
        if weights.len() != c {
            return Err(CliError::usage(format!("weights: expected {c} values, got {}", weights.len())));
        }
        let means = match (&self.means, self.mean_bound) {
            (Some(_), Some(_)) => return Err(CliError::usage("means and mean_bound are mutually exclusive")),
            (Some(m), None) => MeanSpec::Explicit(m.clone()),
            (None, b) => MeanSpec::Uniform(b.unwrap_or(0.0)),
        };
        let lambda1 = self.lambda1.expand("lambda1", c)?;
        let (snr, delta) = match (&self.snr, &self.delta) {
            (Some(s), None) => (Some(s.expand("snr", c)?), None),
            (None, Some(d)) => (None, Some(d.expand("delta", c)?)),
            _ => return Err(CliError::usage("exactly one of snr and delta must be given")),
        };
        let spectra = types
            .into_iter()
            .enumerate()
            .map(|(k, composition)| SpectrumSpec {
                composition,
                lambda1: lambda1[k],
                snr: snr.as_ref().map(|v| v[k]),
                delta: delta.as_ref().map(|v| v[k]),
            })
            .collect();
        let distribution = match self.distribution.as_deref().unwrap_or("gaussian") {
            "gaussian" => {
                if self.skew_shape.is_some() {
                    return Err(CliError::usage("skew_shape requires distribution = \"skew-normal\""));
                }
                Distribution::Gaussian
            }
            "skew-normal" => Distribution::SkewNormal(
                self.skew_shape.clone().unwrap_or(OneOrMany::One(1.0)).expand("skew_shape", p)?,
            ),
            other => {
                return Err(CliError::usage(format!(
                    "distribution: unknown value {other:?}; expected \"gaussian\" or \"skew-normal\""
                )))
            }
        };
        let spec = SyntheticSpec {
            n: self.n,
            weights,
            means,
            spectra,
            distribution,
        };
        spec.validate().map_err(|e| CliError::usage(e.to_string()))?;
        Ok(spec)
    }
}

fn default_truth_path(out: &Path) -> PathBuf {
    out.with_extension("truth.json")
}

pub fn run(args: &GenerateArgs) -> CliResult<()> {
    let text = read_text(&args.spec)?;
    let file = SpecFile::parse(&text, &args.spec.display().to_string())?;
    let spec = file.to_spec()?;
    let seed = args.seed.or(file.seed).unwrap_or(0);
    let sample = sample_mpsa(&spec, &mut ChaCha8Rng::seed_from_u64(seed))?;
    write_dataset(&args.out, &sample.x, Some(&sample.labels))?;
    let truth = args.truth.clone().unwrap_or_else(|| default_truth_path(&args.out));
    write_atomic(&truth, serialize(&sample.truth).as_bytes())?;
    println!(
        "wrote {} samples in {} dimensions to {} (model: {})",
        spec.n,
        spec.dim(),
        args.out.display(),
        truth.display()
    );
    Ok(())
}
