//! Command-line front end: argument parsing, subcommand dispatch, report
//! serialization and SVG output.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub mod commands;
pub mod error;
pub mod render;
pub mod report;

pub use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "errstat", version, about = "Probabilistic comparison of method error sets on a shared benchmark")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalOpts {
    /// Bootstrap replicates.
    #[arg(long, global = true, default_value_t = 1000)]
    pub boot: usize,
    /// Master random seed.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Quantile level used by `--stat q`.
    #[arg(long, global = true, default_value_t = 0.95)]
    pub q: f64,
    #[arg(long = "quantile-method", global = true, value_enum, default_value_t = QuantileMethodArg::Hd)]
    pub quantile_method: QuantileMethodArg,
    /// Write the JSON report here (`-` for standard output).
    #[arg(long, global = true, value_name = "PATH")]
    pub json: Option<PathBuf>,
    /// Write the main SVG figure here.
    #[arg(long, global = true, value_name = "PATH")]
    pub svg: Option<PathBuf>,
    /// Write the main result table as CSV here.
    #[arg(long, global = true, value_name = "PATH")]
    pub csv: Option<PathBuf>,
    /// Width and height of SVG figures in pixels.
    #[arg(long = "svg-size", global = true, default_value_t = render::DEFAULT_SIZE_PX)]
    pub svg_size: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum QuantileMethodArg {
    Hd,
    Type7,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CorrOn {
    Errors,
    Values,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OrientationArg {
    /// Smallest score gets rank 1.
    Lower,
    /// Largest score gets rank 1.
    Higher,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RhoScaleArg {
    Gaussian,
    Pearson,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-method statistics with bootstrap standard errors.
    Stats {
        data: PathBuf,
        /// Statistics: mse, mue, rmsd, q95, q (level from --q).
        #[arg(long, value_delimiter = ',', default_value = "mse,mue,rmsd,q")]
        stat: Vec<String>,
    },
    /// Compare two methods on one statistic.
    Compare {
        data: PathBuf,
        /// Two method names, `A,B`.
        #[arg(long)]
        pair: String,
        #[arg(long, default_value = "mue")]
        stat: String,
        /// Enlargement factor for the significance flag.
        #[arg(long, default_value_t = errstat_core::inference::DEFAULT_KAPPA)]
        kappa: f64,
        /// Resample size for N'-out-of-N bootstrap.
        #[arg(long)]
        nprime: Option<usize>,
    },
    /// Systematic improvement probabilities between all methods.
    Sip {
        data: PathBuf,
        /// Pair for the ECDF of absolute-error differences, `A,B`.
        #[arg(long)]
        pair: Option<String>,
        /// Write the ECDF figure of the pair here.
        #[arg(long, value_name = "PATH")]
        ecdf: Option<PathBuf>,
        /// Dataset uncertainty level drawn around zero on the ECDF figure.
        #[arg(long = "u-bar")]
        u_bar: Option<f64>,
    },
    /// Correlation matrix of errors or predicted values.
    Corr {
        data: PathBuf,
        /// Pearson instead of Spearman.
        #[arg(long)]
        pearson: bool,
        #[arg(long, value_enum, default_value_t = CorrOn::Errors)]
        on: CorrOn,
    },
    /// Ranking probability matrix.
    Rank {
        data: PathBuf,
        /// mse, mue, rmsd, q95, q or msip.
        #[arg(long, default_value = "mue")]
        stat: String,
        /// Resample size for N'-out-of-N bootstrap.
        #[arg(long)]
        nprime: Option<usize>,
        #[arg(long, value_enum)]
        orientation: Option<OrientationArg>,
    },
    /// Simulation studies.
    #[command(subcommand)]
    Simulate(Study),
}

#[derive(Debug, Subcommand)]
pub enum Study {
    /// Draw a g-and-h sample and summarize it.
    Gh {
        #[arg(long, default_value_t = 0.0)]
        g: f64,
        #[arg(long, default_value_t = 0.0)]
        h: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        mu: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long = "n", default_value_t = 1000)]
        n: usize,
    },
    /// Correlation between statistics of correlated error sets.
    Corrtransfer {
        #[arg(long = "n", value_delimiter = ',')]
        n: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        rho: Option<Vec<f64>>,
        #[arg(long)]
        reps: Option<usize>,
        /// g-and-h shapes as `g:h`, comma separated.
        #[arg(long, value_delimiter = ',')]
        scenario: Option<Vec<String>>,
        #[arg(long = "rho-scale", value_enum, default_value_t = RhoScaleArg::Pearson)]
        rho_scale: RhoScaleArg,
    },
    /// Type-I error rate of the generalized p-value test.
    Type1 {
        /// mue, q95, q, mse or rmsd, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "mue,q95")]
        stat: Vec<String>,
        #[arg(long = "n", value_delimiter = ',')]
        n: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        rho: Option<Vec<f64>>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        scenario: Option<Vec<String>>,
    },
    /// Sampling distributions of the HD and type 7 Q95 estimators.
    Hdstudy {
        #[arg(long = "n", value_delimiter = ',')]
        n: Option<Vec<usize>>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long, default_value_t = 0.1, allow_hyphen_values = true)]
        mu: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
    },
    /// Generalized versus analytic p-values for correlated normal pairs.
    Pvalue {
        #[arg(long = "n", value_delimiter = ',')]
        n: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        rho: Option<Vec<f64>>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long, default_value = "mse")]
        stat: String,
    },
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code: 0 on success, 2 on bad input, 1 on internal errors.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match commands::execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
