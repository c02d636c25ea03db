//! Flat settings shared by the config file and the command-line flags.
//!
//! The config file is a TOML table whose keys are the flag names in
//! snake_case. Flags override file values. After defaults are filled in,
//! the resolved settings are embedded in the report and can be fed back
//! through `--config` to reproduce it.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use kmte::propensity::{Kernel, PropensityMethod, PropensitySpec, SeriesOrder, DEFAULT_TRIM};
use kmte::EstimandKind;
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimand {
    Ate,
    Dte,
    Qte,
    Late,
    Ldte,
    Lqte,
    Att,
    Dtt,
    Qtt,
}

impl From<Estimand> for EstimandKind {
    fn from(e: Estimand) -> Self {
        match e {
            Estimand::Ate => EstimandKind::Ate,
            Estimand::Dte => EstimandKind::Dte,
            Estimand::Qte => EstimandKind::Qte,
            Estimand::Late => EstimandKind::Late,
            Estimand::Ldte => EstimandKind::Ldte,
            Estimand::Lqte => EstimandKind::Lqte,
            Estimand::Att => EstimandKind::Att,
            Estimand::Dtt => EstimandKind::Dtt,
            Estimand::Qtt => EstimandKind::Qtt,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PropensityChoice {
    Logit,
    Series,
    Kernel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelChoice {
    Epanechnikov,
    Uniform,
    Gaussian,
}

impl From<KernelChoice> for Kernel {
    fn from(k: KernelChoice) -> Self {
        match k {
            KernelChoice::Epanechnikov => Kernel::Epanechnikov,
            KernelChoice::Uniform => Kernel::Uniform,
            KernelChoice::Gaussian => Kernel::Gaussian,
        }
    }
}

/// First-step options common to both commands.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
pub struct PropensityArgs {
    /// Propensity score method [default: series]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub propensity: Option<PropensityChoice>,
    /// Number of series terms; automatic when omitted
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub series_order: Option<usize>,
    /// Kernel bandwidth, required with `--propensity kernel`
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
    /// Kernel for `--propensity kernel` [default: epanechnikov]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelChoice>,
    /// Clamp fitted probabilities to [trim, 1 - trim] [default: 0.01]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trim: Option<f64>,
}

impl PropensityArgs {
    fn overlay(self, over: Self) -> Self {
        Self {
            propensity: over.propensity.or(self.propensity),
            series_order: over.series_order.or(self.series_order),
            bandwidth: over.bandwidth.or(self.bandwidth),
            kernel: over.kernel.or(self.kernel),
            trim: over.trim.or(self.trim),
        }
    }

    fn fill_defaults(&mut self) {
        let method = *self.propensity.get_or_insert(PropensityChoice::Series);
        self.trim.get_or_insert(DEFAULT_TRIM);
        if method == PropensityChoice::Kernel {
            self.kernel.get_or_insert(KernelChoice::Epanechnikov);
        }
    }

    pub fn spec(&self) -> CliResult<PropensitySpec> {
        let trim = self.trim.unwrap_or(DEFAULT_TRIM);
        if !(0.0..0.5).contains(&trim) {
            return Err(CliError::Validation(format!("trim must lie in [0, 0.5), got {trim}")));
        }
        let method = match self.propensity.unwrap_or(PropensityChoice::Series) {
            PropensityChoice::Logit => PropensityMethod::ParametricLogit,
            PropensityChoice::Series => PropensityMethod::SeriesLogit {
                order: match self.series_order {
                    None => SeriesOrder::Auto,
                    Some(0) => return Err(CliError::Validation("series order must be >= 1".into())),
                    Some(l) => SeriesOrder::Terms(l),
                },
            },
            PropensityChoice::Kernel => PropensityMethod::Kernel {
                bandwidth: self.bandwidth.ok_or_else(|| {
                    CliError::Validation("kernel propensity requires a bandwidth".into())
                })?,
                kernel: self.kernel.unwrap_or(KernelChoice::Epanechnikov).into(),
            },
        };
        Ok(PropensitySpec::new(method).with_trim(trim))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
pub struct EstimateSettings {
    /// CSV with columns q, delta, x1.. and t, z, g, period as the estimand needs
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// Effect to estimate
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimand: Option<Estimand>,
    #[command(flatten)]
    #[serde(flatten)]
    pub propensity: PropensityArgs,
    /// Bootstrap replicates for the uniform band; 0 disables [default: 0]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bootstrap_b: Option<usize>,
    /// Band level [default: 0.05]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Outcome levels for DTE, LDTE and DTT, comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<f64>>,
    /// Quantile levels for QTE, LQTE and QTT, comma separated
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_grid: Option<Vec<f64>>,
    /// Report truncated estimands when a group's largest observation is censored
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub allow_defective: Option<bool>,
    /// Seed for all randomness; drawn from entropy and printed when omitted
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Worker threads for the bootstrap
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    /// Report path; standard output when omitted
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
pub struct SimulateSettings {
    /// Design ids, comma separated [default: 1,2,3,4]
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub designs: Option<Vec<u8>>,
    /// Target censoring shares, comma separated [default: 0,0.1,0.3]
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub censoring: Option<Vec<f64>>,
    /// Replications per cell [default: 1000]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    /// Sample size per replication [default: 1000]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Estimators among 2SKM, Ignore, Uncens [default: all]
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimators: Option<Vec<String>>,
    #[command(flatten)]
    #[serde(flatten)]
    pub propensity: PropensityArgs,
    /// Seed for all randomness; drawn from entropy and printed when omitted
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Worker threads for the replications
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    /// CSV path; standard output when omitted
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl EstimateSettings {
    pub fn overlay(self, over: Self) -> Self {
        Self {
            input: over.input.or(self.input),
            estimand: over.estimand.or(self.estimand),
            propensity: self.propensity.overlay(over.propensity),
            bootstrap_b: over.bootstrap_b.or(self.bootstrap_b),
            alpha: over.alpha.or(self.alpha),
            grid: over.grid.or(self.grid),
            tau_grid: over.tau_grid.or(self.tau_grid),
            allow_defective: over.allow_defective.or(self.allow_defective),
            seed: over.seed.or(self.seed),
            threads: over.threads.or(self.threads),
            output: over.output.or(self.output),
        }
    }

    /// Fills every default except the seed.
    pub fn fill_defaults(&mut self) {
        self.propensity.fill_defaults();
        self.bootstrap_b.get_or_insert(0);
        self.alpha.get_or_insert(0.05);
        self.allow_defective.get_or_insert(false);
    }

    /// Hash of everything that affects the estimates.
    pub fn fingerprint(&self) -> String {
        let mut core = self.clone();
        core.threads = None;
        core.output = None;
        sha256_json(&core)
    }
}

impl SimulateSettings {
    pub fn overlay(self, over: Self) -> Self {
        Self {
            designs: over.designs.or(self.designs),
            censoring: over.censoring.or(self.censoring),
            reps: over.reps.or(self.reps),
            n: over.n.or(self.n),
            estimators: over.estimators.or(self.estimators),
            propensity: self.propensity.overlay(over.propensity),
            seed: over.seed.or(self.seed),
            threads: over.threads.or(self.threads),
            output: over.output.or(self.output),
        }
    }

    pub fn fill_defaults(&mut self) {
        self.designs.get_or_insert_with(|| vec![1, 2, 3, 4]);
        self.censoring.get_or_insert_with(|| vec![0.0, 0.10, 0.30]);
        self.reps.get_or_insert(1000);
        self.n.get_or_insert(1000);
        self.estimators
            .get_or_insert_with(|| ["2SKM", "Ignore", "Uncens"].map(String::from).to_vec());
        self.propensity.fill_defaults();
    }

    pub fn fingerprint(&self) -> String {
        let mut core = self.clone();
        core.threads = None;
        core.output = None;
        sha256_json(&core)
    }
}

fn sha256_json<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("settings serialize to JSON");
    hex::encode(Sha256::digest(&json))
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Reads a flat TOML settings file.
pub fn load_settings<T: DeserializeOwned + Serialize>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
    parse_settings(&text)
        .map_err(|e| CliError::Validation(format!("invalid config {}: {e}", path.display())))
}

pub fn parse_settings<T: DeserializeOwned + Serialize>(text: &str) -> Result<T, String> {
    let table: toml::Table = toml::from_str(text).map_err(|e| e.message().to_string())?;
    let settings: T = table.clone().try_into().map_err(|e: toml::de::Error| e.message().to_string())?;
    // every recognised key comes back on re-serialization
    let known = toml::Table::try_from(&settings).map_err(|e| e.to_string())?;
    match table.keys().find(|k| !known.contains_key(*k)) {
        Some(key) => Err(format!("unknown key {key:?}")),
        None => Ok(settings),
    }
}
