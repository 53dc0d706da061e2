//! `dembed`: batch front-end for the watermarking toolkit.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 failed
//! validation under `--strict`.

mod commands;
mod output;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dembed_core::optimize::DistortionMetric;
use dembed_core::scheme::DecoderFamily;

/// Raised for invalid flags or inputs; maps to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Parser)]
#[command(
    name = "dembed",
    version,
    about = "Optimal multi-bit watermarking toolkit over finite alphabets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Source distribution: per-symbol (length `V`) or sequence-level
/// (length `V^T`).
#[derive(Args, Clone, Debug)]
pub struct SourceArgs {
    /// Comma-separated probabilities.
    #[arg(long, value_delimiter = ',', conflicts_with = "pmf_file")]
    pub pmf: Option<Vec<f64>>,
    /// JSON array of probabilities.
    #[arg(long = "pmf-file")]
    pub pmf_file: Option<PathBuf>,
    /// Alphabet size; defaults to the PMF length.
    #[arg(long = "V")]
    pub v: Option<usize>,
}

#[derive(Args, Clone, Debug)]
pub struct SchemeArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long = "T", default_value_t = 1)]
    pub t: usize,
    #[arg(long)]
    pub m: u64,
    #[arg(long)]
    pub alpha: f64,
    /// Distortion budget on the sequence law.
    #[arg(long, default_value_t = 0.0)]
    pub d: f64,
    #[arg(long, default_value = "tv")]
    pub metric: DistortionMetric,
    #[arg(long, default_value = "cyclic")]
    pub family: DecoderFamily,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum OptimizeMode {
    MinOverhang,
    MaxEntropy,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum NullLaw {
    /// Unwatermarked data drawn from the scheme's source.
    Native,
    /// No null trials; report the exact worst case.
    WorstCase,
}

#[derive(Subcommand)]
enum Command {
    /// Min-max message error `Σ(P(x) - α/m)_+` of a source.
    BetaStar {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long = "T", default_value_t = 1)]
        t: usize,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        m: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Distortion-ball programs.
    Optimize {
        mode: OptimizeMode,
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long = "T", default_value_t = 1)]
        t: usize,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        m: Option<u64>,
        #[arg(long)]
        d: f64,
        #[arg(long, default_value = "tv")]
        metric: DistortionMetric,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Builds the optimal finite-length scheme and writes its manifest.
    Build {
        #[command(flatten)]
        scheme: SchemeArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the binary coupling dump here.
        #[arg(long)]
        couplings: Option<PathBuf>,
    },
    /// Exact validation of a bundle manifest.
    Validate {
        bundle: PathBuf,
        /// Exit with status 3 when any check fails or flag is raised.
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo evaluation of a bundle manifest.
    Simulate {
        bundle: PathBuf,
        #[arg(long)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "native")]
        h0: NullLaw,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-message CSV rows.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Length sweep of the typical-set scheme.
    Asymptotic {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long = "T", value_delimiter = ',', default_value = "8,12,16,20")]
        t: Vec<usize>,
        #[arg(long)]
        m: u64,
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Typicality radius; defaults to `T^(-1/4)`.
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Error-exponent fits and bounds.
    Exponent {
        #[command(subcommand)]
        cmd: ExponentCmd,
    },
    /// Green/red-list baseline.
    Baseline {
        #[command(subcommand)]
        cmd: BaselineCmd,
    },
    /// Cartesian parameter grid of finite schemes, one CSV row per message.
    Sweep {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long = "T", value_delimiter = ',', default_value = "1")]
        t: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        m: Vec<u64>,
        #[arg(long, value_delimiter = ',', required = true)]
        alpha: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        d: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "tv")]
        metric: Vec<DistortionMetric>,
        #[arg(long, default_value = "cyclic")]
        family: DecoderFamily,
        /// Monte Carlo trials per cell; 0 leaves the estimate columns empty.
        #[arg(long, default_value_t = 0)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Brute-force min-max oracle for tiny instances.
    Oracle {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        m: u64,
        /// `1/K` or a decimal.
        #[arg(long = "grid-step", default_value = "1/40")]
        grid_step: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
pub enum ExponentCmd {
    /// Monte Carlo exponent of an i.i.d. hypothesis family.
    Fit {
        /// Per-symbol joints, `;`-separated, each comma-separated; the
        /// first is the unwatermarked hypothesis.
        #[arg(long, conflicts_with = "joints_file")]
        joints: Option<String>,
        /// JSON array of arrays.
        #[arg(long = "joints-file")]
        joints_file: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        j: usize,
        #[arg(long = "T", value_delimiter = ',', default_value = "4,5,6,7,8,9,10,11,12")]
        t: Vec<usize>,
        /// Error allowed to the rival hypothesis.
        #[arg(long, default_value_t = 0.25)]
        level: f64,
        #[arg(long, default_value_t = 1_000_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exponent ceiling of bundles built over a distortion grid.
    Bound {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long = "T", default_value_t = 1)]
        t: usize,
        #[arg(long)]
        m: u64,
        #[arg(long)]
        alpha: f64,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        d: Vec<f64>,
        #[arg(long, default_value = "tv")]
        metric: DistortionMetric,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
pub enum BaselineCmd {
    /// Generates a watermarked token sequence.
    Generate {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long = "T")]
        t: usize,
        #[arg(long)]
        rho: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 0)]
        key: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Green-count z-test on a token sequence.
    Detect {
        /// Comma-separated token ids.
        #[arg(long, value_delimiter = ',', conflicts_with = "tokens_file")]
        tokens: Option<Vec<usize>>,
        /// JSON integer array, or a `generate` report.
        #[arg(long = "tokens-file")]
        tokens_file: Option<PathBuf>,
        #[arg(long = "V")]
        v: usize,
        #[arg(long)]
        rho: f64,
        #[arg(long, default_value_t = 0)]
        key: u64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Expected per-token distortion over a grid of boosts.
    Distortion {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long)]
        rho: f64,
        #[arg(long, value_delimiter = ',')]
        delta: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Detection frequency over a grid of boosts, random key per trial.
    Power {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long = "T")]
        t: usize,
        #[arg(long)]
        rho: f64,
        #[arg(long, value_delimiter = ',')]
        delta: Vec<f64>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    use commands::*;
    match cli.command {
        Command::BetaStar {
            source,
            t,
            alpha,
            m,
            out,
        } => beta_star(&source, t, alpha, m, out.as_deref()),
        Command::Optimize {
            mode,
            source,
            t,
            alpha,
            m,
            d,
            metric,
            out,
        } => optimize(mode, &source, t, alpha, m, d, metric, out.as_deref()),
        Command::Build { scheme, out, couplings } => build(&scheme, out.as_deref(), couplings.as_deref()),
        Command::Validate { bundle, strict, out } => validate(&bundle, strict, out.as_deref()),
        Command::Simulate {
            bundle,
            trials,
            seed,
            h0,
            out,
            csv,
        } => simulate(&bundle, trials, seed, h0, out.as_deref(), csv.as_deref()),
        Command::Asymptotic {
            source,
            t,
            m,
            alpha,
            trials,
            seed,
            eta,
            out,
        } => asymptotic(&source, &t, m, alpha, trials, seed, eta, out.as_deref()),
        Command::Exponent { cmd } => exponent(cmd),
        Command::Baseline { cmd } => baseline(cmd),
        Command::Sweep {
            source,
            t,
            m,
            alpha,
            d,
            metric,
            family,
            trials,
            seed,
            out,
        } => sweep(
            &source,
            &SweepAxes { t, m, alpha, d, metric },
            family,
            trials,
            seed,
            out.as_deref(),
        ),
        Command::Oracle {
            source,
            alpha,
            m,
            grid_step,
            out,
        } => oracle(&source, alpha, m, &grid_step, out.as_deref()),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use dembed_core::Error as CoreError;
    for cause in err.chain() {
        if cause.is::<ConfigError>() || cause.is::<serde_json::Error>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<CoreError>() {
            return match e {
                CoreError::Io(_) | CoreError::Censored => 1,
                _ => 2,
            };
        }
        if cause.is::<std::io::Error>() {
            return 1;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
