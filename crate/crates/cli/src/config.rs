//! JSON run configuration and its merge with command-line flags.
//!
//! Flags win over the file; the file wins over built-in defaults.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::Deserialize;

use modeweight::bench::DensityOptions;
use modeweight::rng::DEFAULT_SEED;
use modeweight::{BandwidthRule, DescentConfig, Init, SimplexWeights};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub delta: Option<f64>,
    pub iters: Option<usize>,
    pub init: Option<InitSpec>,
    pub ell: Option<usize>,
    pub bandwidth: Option<BandwidthSpec>,
    pub subsample: Option<usize>,
    pub seed: Option<u64>,
    pub experiment: Option<ExperimentSpec>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum InitSpec {
    Named(String),
    Weights(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum BandwidthSpec {
    Named(String),
    Fixed(FixedBandwidth),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedBandwidth {
    pub fixed: f64,
}

/// Experiment id plus the parameter grid of a bench command.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub id: String,
    pub a: Option<Vec<f64>>,
    pub d: Option<Vec<usize>>,
    pub n: Option<Vec<usize>>,
    pub k: Option<usize>,
    pub runs: Option<usize>,
}

impl RunConfigFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::input(e.to_string()))
    }
}

/// Descent and density flags shared by `reweight` and the bench commands.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// JSON configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Step size of the exponentiated gradient.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Number of descent iterations.
    #[arg(long)]
    pub iters: Option<usize>,
    /// `no-overlap`, `uniform`, or comma-separated weights.
    #[arg(long)]
    pub init: Option<String>,
    /// Number of top-variance features fed to the KDE (default `min(d, 10)`).
    #[arg(long)]
    pub ell: Option<usize>,
    /// `scott`, `silverman`, `sj`, or `fixed:<h>`.
    #[arg(long)]
    pub bandwidth: Option<String>,
    /// Per-cluster subsample size of the stochastic gradient.
    #[arg(long)]
    pub subsample: Option<usize>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub descent: DescentConfig,
    pub density: DensityOptions,
    pub seed: u64,
    pub experiment: Option<ExperimentSpec>,
}

impl RunArgs {
    pub fn resolve(&self) -> CliResult<Resolved> {
        let file = match &self.config {
            Some(p) => RunConfigFile::load(p)?,
            None => RunConfigFile::default(),
        };
        let init = match (&self.init, &file.init) {
            (Some(s), _) => parse_init(s)?,
            (None, Some(InitSpec::Named(s))) => parse_init(s)?,
            (None, Some(InitSpec::Weights(w))) => Init::Custom(SimplexWeights::new(w.clone())?),
            (None, None) => Init::NoOverlap,
        };
        let rule = match (&self.bandwidth, &file.bandwidth) {
            (Some(s), _) => parse_bandwidth(s)?,
            (None, Some(BandwidthSpec::Named(s))) => parse_bandwidth(s)?,
            (None, Some(BandwidthSpec::Fixed(f))) => fixed_bandwidth(f.fixed)?,
            (None, None) => BandwidthRule::Scott,
        };
        let seed = self.seed.or(file.seed).unwrap_or(DEFAULT_SEED);
        let defaults = DescentConfig::default();
        let descent = DescentConfig {
            step_size: self.delta.or(file.delta).unwrap_or(defaults.step_size),
            iterations: self.iters.or(file.iters).unwrap_or(defaults.iterations),
            init,
            subsample: self.subsample.or(file.subsample),
            seed,
        };
        if !(descent.step_size > 0.0 && descent.step_size.is_finite()) {
            return Err(CliError::input("delta must be a positive number"));
        }
        let ell = self.ell.or(file.ell);
        if ell == Some(0) {
            return Err(CliError::input("ell must be at least 1"));
        }
        Ok(Resolved {
            descent,
            density: DensityOptions { ell, rule },
            seed,
            experiment: file.experiment,
        })
    }
}

pub fn parse_init(s: &str) -> CliResult<Init> {
    match s {
        "no-overlap" => Ok(Init::NoOverlap),
        "uniform" => Ok(Init::Uniform),
        _ => {
            let w = parse_list::<f64>(s).map_err(|_| {
                CliError::input(format!("init `{s}`: expected no-overlap, uniform or comma-separated weights"))
            })?;
            Ok(Init::Custom(SimplexWeights::new(w)?))
        }
    }
}

pub fn parse_bandwidth(s: &str) -> CliResult<BandwidthRule> {
    match s {
        "scott" => Ok(BandwidthRule::Scott),
        "silverman" => Ok(BandwidthRule::Silverman),
        "sj" => Ok(BandwidthRule::SheatherJones),
        _ => match s.strip_prefix("fixed:").map(str::parse::<f64>) {
            Some(Ok(h)) => fixed_bandwidth(h),
            _ => Err(CliError::input(format!(
                "bandwidth `{s}`: expected scott, silverman, sj or fixed:<h>"
            ))),
        },
    }
}

fn fixed_bandwidth(h: f64) -> CliResult<BandwidthRule> {
    if h > 0.0 && h.is_finite() {
        Ok(BandwidthRule::Fixed(h))
    } else {
        Err(CliError::input("fixed bandwidth must be positive"))
    }
}

pub fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>, T::Err> {
    s.split(',').map(|t| t.trim().parse()).collect()
}
