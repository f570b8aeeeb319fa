use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use zfdfe_core::codebook::{CodebookKind, Metric, DEFAULT_BUDGET};
use zfdfe_core::selection::DistortionKind;
use zfdfe_core::{ObjectiveKind, SystemConfig};

#[derive(Parser, Debug)]
#[command(name = "zfdfe", version, about = "Limited-feedback precoding for ZF-DFE MIMO links")]
pub struct Cli {
    /// Worker threads for parallel loops (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Root of the output tree.
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build or inspect precoder codebooks.
    Codebook {
        #[command(subcommand)]
        cmd: CodebookCmd,
    },
    /// Pick the best codebook entry for one random channel.
    Select(SelectArgs),
    /// Monte Carlo link simulation.
    Simulate {
        #[command(subcommand)]
        kind: SimKind,
    },
    /// Estimate quantization distortion of a codebook.
    Distortion(DistortionArgs),
    /// Run randomized property suites.
    Verify(VerifyArgs),
}

#[derive(Subcommand, Debug)]
pub enum CodebookCmd {
    Build(BuildArgs),
    Stats(StatsArgs),
}

#[derive(Subcommand, Debug)]
pub enum SimKind {
    /// Uncoded bit error rate.
    Ber(SimArgs),
    /// Per-channel mutual information with Gaussian inputs.
    Mi(SimArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum KindArg {
    Grassmann,
    Permutation,
}

impl From<KindArg> for CodebookKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Grassmann => CodebookKind::Grassmann,
            KindArg::Permutation => CodebookKind::Permutation,
        }
    }
}

#[derive(Args, Debug)]
pub struct BuildArgs {
    #[arg(long)]
    pub nt: usize,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value = "grassmann", value_parser = parse_kind)]
    pub kind: CodebookKind,
    /// Number of entries (grassmann only).
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    #[arg(long, default_value = "proj2")]
    pub metric: Metric,
    /// Distance evaluations spent by the optimizer.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    pub budget: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Where to write the codebook (defaults to the run directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub name: Option<String>,
}

fn parse_kind(s: &str) -> Result<CodebookKind, String> {
    KindArg::from_str(s, true).map(Into::into)
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    pub codebook: PathBuf,
}

/// System configuration from a JSON file, with optional overrides.
#[derive(Args, Debug, Clone)]
pub struct ConfigArgs {
    /// JSON file with {nt, nr, k, p_total, sigma2_n}.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub nt: Option<usize>,
    #[arg(long)]
    pub nr: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub p_total: Option<f64>,
    #[arg(long)]
    pub sigma2: Option<f64>,
}

impl ConfigArgs {
    /// Without a file, `nt`, `nr` and `k` are required and power and noise
    /// default to 1.
    pub fn resolve(&self) -> anyhow::Result<SystemConfig> {
        let base = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| zfdfe_core::Error::InvalidConfig(format!("reading config {}: {e}", p.display())))?;
                Some(SystemConfig::from_json(&text).with_context(|| format!("parsing config {}", p.display()))?)
            }
            None => None,
        };
        let pick = |v: Option<usize>, b: Option<usize>, what: &str| {
            v.or(b).ok_or_else(|| zfdfe_core::Error::InvalidConfig(format!("--{what} is required without --config")))
        };
        let cfg = SystemConfig::new(
            pick(self.nt, base.map(|c| c.nt), "nt")?,
            pick(self.nr, base.map(|c| c.nr), "nr")?,
            pick(self.k, base.map(|c| c.k), "k")?,
            self.p_total.or(base.map(|c| c.p_total)).unwrap_or(1.0),
            self.sigma2.or(base.map(|c| c.sigma2_n)).unwrap_or(1.0),
        )?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
pub struct SelectArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long)]
    pub codebook: PathBuf,
    /// Seed of the channel draw.
    #[arg(long, default_value_t = 0)]
    pub channel_seed: u64,
    #[arg(long, default_value = "avg-ber")]
    pub objective: ObjectiveKind,
    /// Operating SNR; rescales the noise variance.
    #[arg(long)]
    pub snr_db: Option<f64>,
    /// Score entries for a linear ZF receiver instead of ZF-DFE.
    #[arg(long)]
    pub linear: bool,
    /// Report the objective of every entry.
    #[arg(long)]
    pub all_values: bool,
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Args, Debug)]
pub struct SimArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Scheme, optionally with a selection objective: `grassmann-zfdfe@sum-mse`.
    /// Repeat to compare several schemes on the same channels.
    #[arg(long = "scheme", required = true)]
    pub schemes: Vec<String>,
    #[arg(long)]
    pub codebook: Option<PathBuf>,
    /// Selection objective for schemes that do not name one.
    #[arg(long, default_value = "avg-ber")]
    pub objective: ObjectiveKind,
    /// Comma-separated SNR points in dB.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub snr_db: Vec<f64>,
    #[arg(long, default_value_t = 1000)]
    pub channels: usize,
    #[arg(long, default_value_t = 50)]
    pub frames: usize,
    /// Feed back correct symbols to the canceller.
    #[arg(long)]
    pub genie: bool,
    #[arg(long, default_value_t = 16)]
    pub modulation: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Args, Debug)]
pub struct DistortionArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long)]
    pub codebook: PathBuf,
    #[arg(long, default_value = "min-snr-loss")]
    pub kind: DistortionKind,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Packing density; when given, the analytic bound is reported too.
    #[arg(long)]
    pub density: Option<f64>,
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Suite name or `all`.
    #[arg(default_value = "all")]
    pub suite: String,
    #[arg(long)]
    pub cases: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub name: Option<String>,
}
