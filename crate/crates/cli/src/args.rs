use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use greybm::experiments::ExperimentConfig;
use greybm::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "greybm",
    version,
    about = "Grey Brownian motion simulation and experiments"
)]
pub struct Cli {
    /// Worker threads for replica ensembles (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Print every experiment name with what it reproduces.
    List,
    /// Evaluate a special function at one or more points.
    Eval(EvalArgs),
    /// Generate a path or a batch of variates.
    Sample(SampleArgs),
    /// Run a named experiment and report its gates.
    Run(RunArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Binary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Function {
    /// Mittag-Leffler function E_beta(x).
    Ml,
    /// M-Wright density M_beta(tau).
    Mwright,
    /// Density of the gBm marginal at time t.
    Marginal,
}

impl Function {
    pub fn name(self) -> &'static str {
        match self {
            Function::Ml => "ml",
            Function::Mwright => "mwright",
            Function::Marginal => "marginal",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SampleKind {
    /// One gBm path on the grid.
    Path,
    /// Mixing variable Y_beta.
    Mixing,
    /// One-sided stable subordinator at unit time.
    Stable,
    /// gBm marginal at the horizon via the subordinated representation.
    Marginal,
}

impl SampleKind {
    pub fn name(self) -> &'static str {
        match self {
            SampleKind::Path => "path",
            SampleKind::Mixing => "mixing",
            SampleKind::Stable => "stable",
            SampleKind::Marginal => "marginal",
        }
    }
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(value_enum)]
    pub function: Function,
    #[arg(long)]
    pub beta: f64,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Evaluation points; repeat or separate with commas.
    #[arg(
        long,
        required = true,
        value_delimiter = ',',
        allow_hyphen_values = true
    )]
    pub x: Vec<String>,
    /// Time for the marginal density.
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

/// Settings shared by `sample` and `run`. Values given here override `--config`.
#[derive(Args, Debug)]
pub struct CommonArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<String>,
    #[arg(long)]
    pub beta: Option<String>,
    #[arg(long)]
    pub grid_n: Option<String>,
    #[arg(long)]
    pub horizon: Option<String>,
    /// Extension before zero, as a fraction of the horizon.
    #[arg(long)]
    pub ext: Option<String>,
    /// Regularization scale as a fraction of the horizon, e.g. `2^-6`.
    #[arg(long)]
    pub eps: Option<String>,
    /// `2^-a..2^-b` or a comma list, as fractions of the horizon.
    #[arg(long)]
    pub eps_ladder: Option<String>,
    /// Builtin kernel name or path to a kernel file.
    #[arg(long)]
    pub kernel: Option<String>,
    #[arg(long)]
    pub replicas: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub k: Option<String>,
    #[arg(long)]
    pub p: Option<String>,
    #[arg(long)]
    pub t: Option<String>,
    /// Flat `key = value` file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file (`sample`) or directory (`run`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

impl CommonArgs {
    pub fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| {
                    Error::InvalidParameter(format!("config {}: {e}", path.display()))
                })?;
                ExperimentConfig::parse(&text)?
            }
            None => ExperimentConfig::default(),
        };
        let flags = [
            ("alpha", &self.alpha),
            ("beta", &self.beta),
            ("grid-n", &self.grid_n),
            ("horizon", &self.horizon),
            ("ext", &self.ext),
            ("eps", &self.eps),
            ("eps-ladder", &self.eps_ladder),
            ("kernel", &self.kernel),
            ("replicas", &self.replicas),
            ("seed", &self.seed),
            ("k", &self.k),
            ("p", &self.p),
            ("t", &self.t),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[arg(value_enum)]
    pub kind: SampleKind,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    pub experiment: String,
    #[command(flatten)]
    pub common: CommonArgs,
}
