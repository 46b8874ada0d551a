use crate::error::CliError;
use clap::{Args, Parser, Subcommand, ValueEnum};
use fdp_core::mechanisms::Mode;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::path::{Path, PathBuf};

#[derive(Parser, Debug)]
#[command(name = "fdp", version, about = "Trade-off function accounting and auditing for normalized DP-SGD variants")]
pub struct Cli {
    /// Worker threads for Monte Carlo estimation and audit trials; results do not depend on it
    #[arg(long, global = true, env = "FDP_THREADS")]
    pub threads: Option<usize>,

    /// Print the resolved configuration and timing to standard error
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Compute a guarantee curve: baseline, upper bound, per-pair or multi-round
    Guarantee(GuaranteeArgs),
    /// Audit a mechanism against a claimed guarantee
    Audit(AuditArgs),
    /// Tabulate curves on a common grid and report where they cross
    Compare(CompareArgs),
    /// Write mechanism releases as JSON lines
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Args, Debug, Clone, Default)]
pub struct OutputArgs {
    /// JSON object of parameters; flags on the command line take precedence
    #[arg(long)]
    pub config: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Write here instead of standard output
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GuaranteeMode {
    Sgm,
    EasgmUpper,
    AsgmUpper,
    FeasgmUpper,
    PerPair,
    MultiRound,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuaranteeArgs {
    /// Guarantee to compute
    #[arg(long, value_enum)]
    #[serde(default)]
    pub mode: Option<GuaranteeMode>,

    /// Mechanism for the per-pair and multi-round modes
    #[arg(long)]
    #[serde(default)]
    pub mechanism: Option<Mode>,

    /// Dataset size N
    #[arg(long = "N", value_name = "N")]
    #[serde(rename = "N", default)]
    pub dataset_size: Option<usize>,

    /// Output dimension n
    #[arg(long = "n", value_name = "n")]
    #[serde(rename = "n", default)]
    pub dim: Option<usize>,

    /// Sampling rate q
    #[arg(long)]
    #[serde(default)]
    pub q: Option<f64>,

    /// Noise multiplier sigma
    #[arg(long)]
    #[serde(default)]
    pub sigma: Option<f64>,

    /// Training rounds T (multi-round mode)
    #[arg(long)]
    #[serde(default)]
    pub rounds: Option<u64>,

    /// Points in the uniform alpha grid
    #[arg(long)]
    #[serde(default)]
    pub grid: Option<usize>,

    /// Monte Carlo samples per distribution
    #[arg(long)]
    #[serde(default)]
    pub samples: Option<usize>,

    /// Base seed; equal seeds give byte-identical output
    #[arg(long)]
    #[serde(default)]
    pub seed: Option<u64>,

    /// Factor count above which products use the CLT envelope
    #[arg(long)]
    #[serde(default)]
    pub clt_switchover: Option<u64>,

    #[command(flatten)]
    #[serde(skip)]
    pub out: OutputArgs,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditArgs {
    /// Mechanism: sgm, easgm, asgm or feasgm
    #[arg(long)]
    #[serde(default)]
    pub mode: Option<Mode>,

    /// Dataset size N
    #[arg(long = "N", value_name = "N")]
    #[serde(rename = "N", default)]
    pub dataset_size: Option<usize>,

    /// Output dimension n
    #[arg(long = "n", value_name = "n")]
    #[serde(rename = "n", default)]
    pub dim: Option<usize>,

    /// Sampling rate q
    #[arg(long)]
    #[serde(default)]
    pub q: Option<f64>,

    /// Noise multiplier sigma
    #[arg(long)]
    #[serde(default)]
    pub sigma: Option<f64>,

    /// Clipping bound C
    #[arg(long = "C", value_name = "C")]
    #[serde(rename = "C", default)]
    pub clip: Option<f64>,

    /// Number of mechanism runs per neighbouring dataset
    #[arg(long)]
    #[serde(default)]
    pub trials: Option<u64>,

    /// Audit epsilon at this delta (default 1e-5)
    #[arg(long, conflicts_with = "eps")]
    #[serde(default)]
    pub delta: Option<f64>,

    /// Audit delta at this epsilon
    #[arg(long)]
    #[serde(default)]
    pub eps: Option<f64>,

    /// Clopper-Pearson confidence level
    #[arg(long)]
    #[serde(default)]
    pub confidence: Option<f64>,

    /// Level of each Gaussianity test in the distinguisher
    #[arg(long)]
    #[serde(default)]
    pub level: Option<f64>,

    /// Base seed; equal seeds give byte-identical output
    #[arg(long)]
    #[serde(default)]
    pub seed: Option<u64>,

    /// Neighbouring datasets as JSON; defaults to the canary construction
    #[arg(long)]
    #[serde(default)]
    pub dataset: Option<PathBuf>,

    /// Claimed curve as a curve spec (see `compare`); defaults to the SGM baseline
    #[arg(long)]
    #[serde(default)]
    pub claim: Option<String>,

    /// Points in the uniform alpha grid
    #[arg(long)]
    #[serde(default)]
    pub grid: Option<usize>,

    /// Monte Carlo samples per distribution
    #[arg(long)]
    #[serde(default)]
    pub samples: Option<usize>,

    /// Factor count above which products use the CLT envelope
    #[arg(long)]
    #[serde(default)]
    pub clt_switchover: Option<u64>,

    #[command(flatten)]
    #[serde(skip)]
    pub out: OutputArgs,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareArgs {
    /// Curve spec `KIND[:key=value,...]`, repeated. Kinds: id, gdp, eps-delta,
    /// sgm, easgm-upper, asgm-upper, feasgm-upper, per-pair, multi-round, file
    #[arg(long = "curve", value_name = "SPEC")]
    #[serde(default)]
    pub curves: Vec<String>,

    /// Points in the uniform alpha grid
    #[arg(long)]
    #[serde(default)]
    pub grid: Option<usize>,

    /// Monte Carlo samples per distribution
    #[arg(long)]
    #[serde(default)]
    pub samples: Option<usize>,

    /// Base seed; equal seeds give byte-identical output
    #[arg(long)]
    #[serde(default)]
    pub seed: Option<u64>,

    /// Factor count above which products use the CLT envelope
    #[arg(long)]
    #[serde(default)]
    pub clt_switchover: Option<u64>,

    /// Minimum gap for one curve to count as below another
    #[arg(long)]
    #[serde(default)]
    pub tolerance: Option<f64>,

    #[command(flatten)]
    #[serde(skip)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    D,
    DPrime,
    Both,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateArgs {
    /// Mechanism: sgm, easgm, asgm or feasgm
    #[arg(long)]
    #[serde(default)]
    pub mode: Option<Mode>,

    /// Dataset size N
    #[arg(long = "N", value_name = "N")]
    #[serde(rename = "N", default)]
    pub dataset_size: Option<usize>,

    /// Output dimension n
    #[arg(long = "n", value_name = "n")]
    #[serde(rename = "n", default)]
    pub dim: Option<usize>,

    /// Sampling rate q
    #[arg(long)]
    #[serde(default)]
    pub q: Option<f64>,

    /// Noise multiplier sigma
    #[arg(long)]
    #[serde(default)]
    pub sigma: Option<f64>,

    /// Clipping bound C
    #[arg(long = "C", value_name = "C")]
    #[serde(rename = "C", default)]
    pub clip: Option<f64>,

    /// Number of releases per dataset
    #[arg(long)]
    #[serde(default)]
    pub trials: Option<u64>,

    /// Base seed; equal seeds give byte-identical output
    #[arg(long)]
    #[serde(default)]
    pub seed: Option<u64>,

    /// Neighbouring datasets as JSON; defaults to the canary construction
    #[arg(long)]
    #[serde(default)]
    pub dataset: Option<PathBuf>,

    /// Which neighbour to release on; both sides of a trial share its seed
    #[arg(long, value_enum)]
    #[serde(default)]
    pub side: Option<Side>,

    #[command(flatten)]
    #[serde(skip)]
    pub out: OutputArgs,
}

/// Overlay the flags on the `--config` object. A flag counts as given when
/// it is not null and not an empty list.
pub fn merge<T: Serialize + DeserializeOwned>(flags: &T, config: Option<&Path>) -> Result<T, CliError> {
    let mut base = match config {
        None => serde_json::Map::new(),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::infra(format!("cannot read config {}: {e}", path.display())))?;
            match serde_json::from_str(&text) {
                Ok(Value::Object(m)) => m,
                Ok(_) => return Err(CliError::validation("config must be a JSON object")),
                Err(e) => return Err(CliError::validation(format!("config {}: {e}", path.display()))),
            }
        }
    };
    if let Value::Object(given) = to_value(flags)? {
        for (k, v) in given {
            let absent = v.is_null() || v.as_array().is_some_and(|a| a.is_empty());
            if !absent {
                base.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(base)).map_err(|e| CliError::validation(format!("config: {e}")))
}

pub fn to_value<T: Serialize>(x: &T) -> Result<Value, CliError> {
    serde_json::to_value(x).map_err(|e| CliError::infra(format!("serialization failed: {e}")))
}

pub fn require<T: Copy>(x: Option<T>, name: &str) -> Result<T, CliError> {
    x.ok_or_else(|| CliError::validation(format!("missing --{name} (flag or \"{name}\" in --config)")))
}
