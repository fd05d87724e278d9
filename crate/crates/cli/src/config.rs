//! Run configuration: a TOML file whose values are overridden by flags.
//!
//! ```toml
//! [fit]
//! components = 3
//! strategy = "bottom-up"
//! alpha = "bic"
//! types = ["1,9", "1,2,7", "1,2,4,3"]
//! reg_eps = 1e-6
//! max_iter = 200
//! tol = 1e-6
//! seed = 0
//!
//! [denoise]
//! patch_size = 8
//! method = "mpsa"
//! sigma = 0.1176
//! ```

use std::path::Path;

use mpsa::denoise::DenoiseMethod;
use mpsa::mixture::{InitialTypes, RelativeScale, SharedNoise};
use mpsa::{cpem_fit, em_fit, Alpha, Composition, FitConfig, FitTrace, Matrix, MpsaModel, Strategy};
use serde::Deserialize;

use crate::args::FitOptions;
use crate::error::{CliError, CliResult};
use crate::files::read_text;

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum NumberOrText {
    Number(f64),
    Text(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum TextOrList {
    Text(String),
    List(Vec<String>),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    pub components: Option<usize>,
    pub seed: Option<u64>,
    pub alpha: Option<NumberOrText>,
    pub strategy: Option<String>,
    pub types: Option<TextOrList>,
    pub reg_eps: Option<f64>,
    pub max_iter: Option<usize>,
    pub tol: Option<f64>,
    pub kmeans_restarts: Option<usize>,
    pub kmeans_max_iter: Option<usize>,
    /// "component" or "total".
    pub relative_scale: Option<String>,
    /// "default", "spherical" or "full".
    pub initial_types: Option<String>,
    /// Tie the smallest eigenvalue across components during the fit.
    pub shared_noise: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenoiseSection {
    pub patch_size: Option<usize>,
    pub method: Option<String>,
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default)]
    pub denoise: DenoiseSection,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = read_text(path)?;
        toml::from_str(&text).map_err(|e| CliError::usage(format!("{}: {}", path.display(), e.to_string().trim_end())))
    }
}

/// Compositions requested for fixed-type fitting.
#[derive(Debug, Clone, PartialEq)]
pub enum TypesSpec {
    Full,
    Spherical,
    Explicit(Vec<Composition>),
}

impl TypesSpec {
    pub fn parse(text: &str) -> CliResult<Self> {
        let t = text.trim();
        match t.to_ascii_lowercase().as_str() {
            "full" => return Ok(TypesSpec::Full),
            "spherical" | "p" => return Ok(TypesSpec::Spherical),
            _ => {}
        }
        Self::from_list(&t.split(';').map(str::to_string).collect::<Vec<_>>())
    }

    fn from_list(items: &[String]) -> CliResult<Self> {
        items
            .iter()
            .enumerate()
            .map(|(k, s)| {
                s.parse::<Composition>()
                    .map_err(|e| CliError::usage(format!("types[{k}]: {e}")))
            })
            .collect::<CliResult<Vec<_>>>()
            .map(TypesSpec::Explicit)
    }

    fn from_config(v: &TextOrList) -> CliResult<Self> {
        match v {
            TextOrList::Text(s) => Self::parse(s),
            TextOrList::List(items) => Self::from_list(items),
        }
    }

    /// One composition per component for `p`-dimensional data.
    pub fn resolve(&self, p: usize, n_components: usize) -> CliResult<Vec<Composition>> {
        let gammas = match self {
            TypesSpec::Full => vec![Composition::full(p); n_components],
            TypesSpec::Spherical => vec![Composition::spherical(p); n_components],
            TypesSpec::Explicit(g) if g.len() == 1 => vec![g[0].clone(); n_components],
            TypesSpec::Explicit(g) if g.len() == n_components => g.clone(),
            TypesSpec::Explicit(g) => {
                return Err(CliError::usage(format!(
                    "{} compositions given for {n_components} components",
                    g.len()
                )))
            }
        };
        if let Some(g) = gammas.iter().find(|g| g.ambient() != p) {
            return Err(CliError::usage(format!("composition {g} does not match dimension {p}")));
        }
        Ok(gammas)
    }
}

pub fn parse_alpha(text: &str) -> CliResult<Alpha> {
    let t = text.trim();
    if t.eq_ignore_ascii_case("bic") {
        return Ok(Alpha::Bic);
    }
    t.parse::<f64>()
        .ok()
        .filter(|a| *a >= 0.0 && a.is_finite())
        .map(Alpha::Value)
        .ok_or_else(|| CliError::usage(format!("alpha must be a nonnegative number or \"bic\", got {text:?}")))
}

pub fn parse_strategy(text: &str) -> CliResult<Strategy> {
    text.parse().map_err(|_| {
        CliError::usage(format!(
            "unknown strategy {text:?}; expected hierarchical, relative, bottom-up, top-down or fixed"
        ))
    })
}

pub fn parse_method(text: &str) -> CliResult<DenoiseMethod> {
    match text.trim().to_ascii_lowercase().as_str() {
        "mpsa" => Ok(DenoiseMethod::Mpsa),
        "gmm-full" | "full" => Ok(DenoiseMethod::GmmFull),
        "gmm-spherical" | "spherical" => Ok(DenoiseMethod::GmmSpherical),
        "hdmi" => Ok(DenoiseMethod::Hdmi),
        other => Err(CliError::usage(format!(
            "unknown method {other:?}; expected mpsa, gmm-full, gmm-spherical or hdmi"
        ))),
    }
}

/// Fully resolved fitting request.
#[derive(Debug, Clone)]
pub struct FitPlan {
    pub config: FitConfig,
    pub components: Option<usize>,
    pub types: Option<TypesSpec>,
    strategy_given: bool,
}

impl FitPlan {
    /// Merges the `[fit]` table of `file` with the flags, flags winning.
    pub fn new(file: &FitSection, flags: &FitOptions) -> CliResult<Self> {
        let mut config = FitConfig::default();
        if let Some(s) = flags.seed.or(file.seed) {
            config.seed = s;
        }
        match (&flags.alpha, &file.alpha) {
            (Some(a), _) => config.alpha = parse_alpha(a)?,
            (None, Some(NumberOrText::Text(a))) => config.alpha = parse_alpha(a)?,
            (None, Some(NumberOrText::Number(a))) => config.alpha = parse_alpha(&a.to_string())?,
            (None, None) => {}
        }
        let strategy = flags.strategy.as_ref().or(file.strategy.as_ref());
        if let Some(s) = strategy {
            config.strategy = parse_strategy(s)?;
        }
        let types = match (&flags.types, &file.types) {
            (Some(t), _) => Some(TypesSpec::parse(t)?),
            (None, Some(t)) => Some(TypesSpec::from_config(t)?),
            (None, None) => None,
        };
        if let Some(v) = flags.reg_eps.or(file.reg_eps) {
            config.reg_eps = v;
        }
        if let Some(v) = flags.max_iter.or(file.max_iter) {
            config.max_iter = v;
        }
        if let Some(v) = flags.tol.or(file.tol) {
            config.rel_tol = v;
        }
        if let Some(v) = file.kmeans_restarts {
            config.kmeans_restarts = v;
        }
        if let Some(v) = file.kmeans_max_iter {
            config.kmeans_max_iter = v;
        }
        if let Some(v) = &file.relative_scale {
            config.relative_scale = match v.as_str() {
                "component" => RelativeScale::Component,
                "total" => RelativeScale::Total,
                other => return Err(CliError::usage(format!("fit.relative_scale: unknown value {other:?}"))),
            };
        }
        if let Some(v) = &file.initial_types {
            config.initial_types = match v.as_str() {
                "default" => InitialTypes::Default,
                "spherical" => InitialTypes::Spherical,
                "full" => InitialTypes::Full,
                other => return Err(CliError::usage(format!("fit.initial_types: unknown value {other:?}"))),
            };
        }
        if file.shared_noise == Some(true) {
            config.shared_noise = SharedNoise::DuringFit;
        }
        config.validate().map_err(|e| CliError::usage(e.to_string()))?;
        if file.components == Some(0) {
            return Err(CliError::usage("fit.components must be positive"));
        }
        Ok(Self {
            config,
            components: file.components,
            types,
            strategy_given: strategy.is_some(),
        })
    }

    /// A plan that runs `config.strategy`, with `types` as the fixed or
    /// initial compositions.
    pub fn with_strategy(config: FitConfig, types: Option<TypesSpec>) -> Self {
        Self {
            config,
            components: None,
            types,
            strategy_given: true,
        }
    }

    /// Loads the configuration file named by the flags, if any, and merges.
    pub fn from_flags(flags: &FitOptions) -> CliResult<(Self, RunConfig)> {
        let file = match &flags.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        Ok((Self::new(&file.fit, flags)?, file))
    }

    /// Types given without a strategy mean plain EM with those types.
    pub fn is_fixed(&self) -> bool {
        self.config.strategy == Strategy::Fixed || (self.types.is_some() && !self.strategy_given)
    }

    pub fn fit(&self, x: &Matrix, n_components: usize) -> CliResult<(MpsaModel, FitTrace)> {
        if n_components == 0 {
            return Err(CliError::usage("components must be positive"));
        }
        let p = x.cols();
        let mut config = self.config.clone();
        let out = if self.is_fixed() {
            let gammas = self
                .types
                .as_ref()
                .unwrap_or(&TypesSpec::Spherical)
                .resolve(p, n_components)?;
            config.strategy = Strategy::Fixed;
            em_fit(x, n_components, &gammas, &config)?
        } else {
            if let Some(t) = &self.types {
                config.initial_types = InitialTypes::Explicit(t.resolve(p, n_components)?);
            }
            cpem_fit(x, n_components, &config)?
        };
        Ok(out)
    }
}
