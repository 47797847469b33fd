//! `geobayes`: variogram estimation, fitting, kriging, simulation and the
//! simulation-based Bayesian predictive density from the command line.

mod commands;
mod output;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "geobayes", version, about = "Geostatistics pipeline: variograms, kriging, simulation, Bayesian predictive densities")]
pub struct Cli {
    /// Seed for every stochastic step.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Flat `key = value` file; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct GridArgs {
    /// NX NY XMIN XMAX YMIN YMAX, both ends of each axis included.
    #[arg(long, num_args = 6, value_names = ["NX", "NY", "XMIN", "XMAX", "YMIN", "YMAX"], allow_negative_numbers = true)]
    pub grid: Option<Vec<f64>>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct ModelArgs {
    /// Model in text form, e.g. "kind=matern nugget=0.1 sill=2.0 range=120.0 nu=0.5".
    #[arg(long)]
    pub model: Option<String>,
    /// File holding the model text.
    #[arg(long)]
    pub model_file: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct BinArgs {
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub max_dist: Option<f64>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Synthetic lognormal point data standing in for a field survey.
    Synth {
        #[arg(long)]
        n: Option<usize>,
        /// Mean of the log-scale field.
        #[arg(long, allow_negative_numbers = true)]
        mean: Option<f64>,
    },
    /// Empirical variogram of point data.
    Variogram {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        log: bool,
        #[command(flatten)]
        bins: BinArgs,
        /// matheron, cressie or huber.
        #[arg(long)]
        estimator: Option<String>,
        #[arg(long)]
        huber_c: Option<f64>,
        /// Direction in degrees from the x axis.
        #[arg(long, allow_negative_numbers = true)]
        direction: Option<f64>,
        /// Angular tolerance in degrees.
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Fit a covariance model to an empirical variogram CSV.
    Fit {
        #[arg(long)]
        input: Option<PathBuf>,
        /// ols, wls or gls.
        #[arg(long)]
        method: Option<String>,
        /// nested_matern or a single model kind.
        #[arg(long)]
        family: Option<String>,
    },
    /// Kriging predictions on a grid, at one point or at the data locations.
    Krige {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        log: bool,
        #[command(flatten)]
        model: ModelArgs,
        /// simple, ordinary, universal or bayes.
        #[arg(long)]
        method: Option<String>,
        #[command(flatten)]
        grid: GridArgs,
        /// Single location `x,y`.
        #[arg(long, allow_hyphen_values = true)]
        at: Option<String>,
        #[arg(long)]
        at_data: bool,
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        min_neighbors: Option<usize>,
        /// Known mean for simple kriging.
        #[arg(long, allow_negative_numbers = true)]
        mean: Option<f64>,
        /// constant, linear or quadratic.
        #[arg(long)]
        trend: Option<String>,
        #[arg(long, allow_negative_numbers = true)]
        prior_mean: Option<f64>,
        #[arg(long)]
        prior_var: Option<f64>,
        /// Also write a grayscale heatmap of the predictions.
        #[arg(long)]
        pgm: bool,
    },
    /// Gaussian random fields and their empirical variograms.
    Simulate {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        log: bool,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        n_sims: Option<usize>,
        #[arg(long, allow_negative_numbers = true)]
        mean: Option<f64>,
        #[arg(long)]
        conditional: bool,
        #[command(flatten)]
        bins: BinArgs,
    },
    /// Posterior draws of the nested Matérn parameters: simulate, estimate, refit.
    Posterior {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        log: bool,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        n_sims: Option<usize>,
        #[command(flatten)]
        bins: BinArgs,
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        conditional: bool,
    },
    /// Predictive density of lognormal data from posterior draws.
    Density {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        draws: Option<PathBuf>,
        /// Single location `x,y`.
        #[arg(long, allow_hyphen_values = true)]
        at: Option<String>,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        min_neighbors: Option<usize>,
        #[arg(long, allow_negative_numbers = true)]
        prior_mean: Option<f64>,
        #[arg(long)]
        prior_var: Option<f64>,
        /// forward or trapezoid.
        #[arg(long)]
        integration: Option<String>,
        /// Heatmap of the median map.
        #[arg(long)]
        pgm: bool,
    },
    /// Frank copula fit and joint density of posterior draws.
    CopulaFit {
        #[arg(long)]
        draws: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
