//! Flag and config-file resolution shared by the subcommands, plus the
//! error type that carries the process exit code.

use std::path::{Path, PathBuf};

use kepler_sr::dataset::{self, DataError, Dataset, ThetaGrid};
use kepler_sr::fit::{EllipseParams, FitError};
use kepler_sr::pareto::LossKey;
use kepler_sr::search::SearchBudget;
use kepler_sr::BiasConfig;

pub const DEFAULT_DATA: &str = "data/rudolphine_mars.csv";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numeric(String),
    #[error("search stopped on its budget with an empty front")]
    EmptyFront,
}

impl CliError {
    /// 2 input error, 3 numerical failure, 4 budget exhausted empty-handed.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::EmptyFront => 4,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

/// Parsed form of `--synthetic a=..,eps=..,n=..,noise=..,seed=..`.
/// Omitted keys fall back to the Mars table's own parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub a: f64,
    pub eps: f64,
    pub n: usize,
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            a: 1.5235,
            eps: 0.0926,
            n: 180,
            noise: 0.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    /// Canonical echo for reports, independent of how the flag was spelled.
    pub fn echo(&self) -> String {
        format!(
            "synthetic a={},eps={},n={},noise={},seed={}",
            self.a, self.eps, self.n, self.noise, self.seed
        )
    }
}

pub fn parse_synthetic(text: &str) -> Result<SyntheticSpec, CliError> {
    let mut spec = SyntheticSpec::default();
    for part in text.split(',').filter(|p| !p.trim().is_empty()) {
        let (key, value) = part.split_once('=').ok_or_else(|| {
            CliError::Input(format!("synthetic entry `{part}` is not key=value"))
        })?;
        let value = value.trim();
        match key.trim() {
            "a" => spec.a = parse_num(value, "a")?,
            "eps" => spec.eps = parse_num(value, "eps")?,
            "noise" => spec.noise = parse_num(value, "noise")?,
            "n" => {
                spec.n = value
                    .parse()
                    .map_err(|_| CliError::Input(format!("bad synthetic n `{value}`")))?
            }
            "seed" => {
                spec.seed = value
                    .parse()
                    .map_err(|_| CliError::Input(format!("bad synthetic seed `{value}`")))?
            }
            other => {
                return Err(CliError::Input(format!(
                    "unknown synthetic key `{other}` (expected a, eps, n, noise, seed)"
                )))
            }
        }
    }
    Ok(spec)
}

fn parse_num(value: &str, key: &str) -> Result<f64, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Input(format!("bad synthetic {key} `{value}`")))
}

/// Parses `--custom obs=true,ind=false` (long spellings accepted too).
pub fn parse_custom_bias(text: &str) -> Result<BiasConfig, CliError> {
    let mut bias = BiasConfig {
        observational: false,
        inductive: false,
    };
    for part in text.split(',').filter(|p| !p.trim().is_empty()) {
        let (key, value) = part.split_once('=').ok_or_else(|| {
            CliError::Input(format!("bias entry `{part}` is not key=value"))
        })?;
        let flag = match value.trim() {
            "true" | "1" | "yes" => true,
            "false" | "0" | "no" => false,
            other => return Err(CliError::Input(format!("bad bias value `{other}`"))),
        };
        match key.trim() {
            "obs" | "observational" => bias.observational = flag,
            "ind" | "inductive" => bias.inductive = flag,
            other => {
                return Err(CliError::Input(format!(
                    "unknown bias key `{other}` (expected obs, ind)"
                )))
            }
        }
    }
    Ok(bias)
}

pub fn parse_loss(text: &str) -> Result<LossKey, CliError> {
    match text {
        "dl" => Ok(LossKey::Dl),
        "mse" => Ok(LossKey::Mse),
        other => Err(CliError::Input(format!(
            "unknown loss `{other}` (expected dl or mse)"
        ))),
    }
}

/// Optional TOML config; keys mirror the command-line flags and flags win.
#[derive(Debug, Default, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub data: Option<PathBuf>,
    pub synthetic: Option<String>,
    pub max_bits: Option<f64>,
    pub max_candidates: Option<usize>,
    pub max_seconds: Option<f64>,
    pub out_dir: Option<PathBuf>,
    pub loss: Option<String>,
}

pub fn load_file_config(path: &Path) -> Result<FileConfig, CliError> {
    let raw = std::fs::read_to_string(path)?;
    toml::from_str(&raw).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Everything a subcommand needs after flags and config are merged.
#[derive(Debug)]
pub struct Settings {
    pub data: Option<PathBuf>,
    pub synthetic: Option<SyntheticSpec>,
    pub budget: SearchBudget,
    pub out_dir: PathBuf,
    pub loss: LossKey,
}

pub struct RawSettings {
    pub data: Option<PathBuf>,
    pub synthetic: Option<String>,
    pub max_bits: Option<f64>,
    pub max_candidates: Option<usize>,
    pub max_seconds: Option<f64>,
    pub out_dir: Option<PathBuf>,
    pub loss: Option<String>,
}

pub fn merge(flags: RawSettings, file: FileConfig) -> Result<Settings, CliError> {
    let defaults = SearchBudget::default();
    let synthetic = flags
        .synthetic
        .or(file.synthetic)
        .map(|s| parse_synthetic(&s))
        .transpose()?;
    let loss = flags
        .loss
        .or(file.loss)
        .map(|s| parse_loss(&s))
        .transpose()?
        .unwrap_or_default();
    Ok(Settings {
        data: flags.data.or(file.data),
        synthetic,
        budget: SearchBudget {
            max_bits: flags.max_bits.or(file.max_bits).unwrap_or(defaults.max_bits),
            max_candidates: flags
                .max_candidates
                .or(file.max_candidates)
                .unwrap_or(defaults.max_candidates),
            max_seconds: flags
                .max_seconds
                .or(file.max_seconds)
                .unwrap_or(defaults.max_seconds),
        },
        out_dir: flags.out_dir.or(file.out_dir).unwrap_or_else(|| "out".into()),
        loss,
    })
}

/// The dataset the flags point at, plus a source string for report echoes.
pub fn resolve_dataset(settings: &Settings) -> Result<(Dataset, String), CliError> {
    if let Some(spec) = settings.synthetic {
        let params = EllipseParams {
            a: spec.a,
            eccentricity: spec.eps,
        };
        let data = dataset::generate_synthetic(
            params,
            spec.n,
            ThetaGrid::UniformTrueAnomaly,
            spec.noise,
            spec.seed,
        )?;
        return Ok((data, spec.echo()));
    }
    let path = settings
        .data
        .clone()
        .unwrap_or_else(|| PathBuf::from(DEFAULT_DATA));
    if !path.exists() {
        return Err(CliError::Input(format!(
            "no data source: `{}` does not exist; pass --data or --synthetic",
            path.display()
        )));
    }
    let data = dataset::load_dataset(&path)?;
    Ok((data, path.display().to_string()))
}
