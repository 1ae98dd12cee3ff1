mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ergm_hope::Method;

use config::{read_config, NamedPath, RunConfig};
use error::CliError;

/// Fit exponential-family random graph models and score them by held-out
/// predictive evaluation.
#[derive(Parser, Debug)]
#[command(name = "ergm-hope", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit one model and write its coefficients, standard errors, AIC and BIC.
    Fit(Common),
    /// Draw graphs from a fitted or given model, optionally conditional on observed dyads.
    Simulate(Common),
    /// Run held-out predictive evaluation for one or more models.
    Hope(Common),
    /// Compare a dataset's descriptive statistics with its reference values.
    VerifyDataset(Common),
    /// Build and print the fold partition for a strategy.
    Partition(Common),
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum MethodArg {
    Mple,
    Mcmle,
    Exact,
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Registered dataset (lazega, teenage) or a directory with edges.txt and attributes.csv.
    dataset: Option<String>,
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root directory of registered datasets (default: $HOPE_DATA_DIR, then ./data).
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    edges: Option<PathBuf>,
    #[arg(long)]
    attributes: Option<PathBuf>,
    /// Dyad covariate matrix as NAME=PATH; repeatable.
    #[arg(long = "covariate", value_parser = parse_named_path)]
    covariates: Vec<NamedPath>,
    #[arg(long)]
    nodes: Option<usize>,
    /// Node numbering in input files (0 or 1).
    #[arg(long)]
    index_base: Option<usize>,
    /// Formula, JSON term array, a file holding either, or m1..m5 for a registered dataset; repeatable.
    #[arg(long = "model")]
    models: Vec<String>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// loo, lmo or node; repeatable.
    #[arg(long = "strategy")]
    strategies: Vec<String>,
    /// Number of leave-M-out folds (default n - 1).
    #[arg(long)]
    folds: Option<usize>,
    /// Restrict evaluation to a random subset of this many dyads.
    #[arg(long)]
    subset: Option<usize>,
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated coefficients for simulate.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    theta: Option<Vec<f64>>,
    /// Fit JSON written by `fit`, used by simulate for the coefficients.
    #[arg(long)]
    fit: Option<PathBuf>,
    /// Dyads to simulate: all, none, or a dyad list file.
    #[arg(long)]
    free: Option<String>,
    /// MCMC draws per estimator iteration.
    #[arg(long)]
    mc_samples: Option<usize>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Skip the log-likelihood estimate for dependence models.
    #[arg(long)]
    no_loglik: bool,
    /// Start every fold fit at the density estimate instead of the full-data MPLE.
    #[arg(long)]
    no_warm_start: bool,
    /// Only dyad-level metrics.
    #[arg(long)]
    no_structural: bool,
    /// Exact change-score marginals under leave-1-out for dyadic independence models.
    #[arg(long)]
    exact_loo_marginals: bool,
    /// Verify the dataset against its reference descriptives before running.
    #[arg(long)]
    check_fixtures: bool,
}

fn parse_named_path(s: &str) -> Result<NamedPath, String> {
    let (name, path) = s.split_once('=').ok_or_else(|| format!("expected NAME=PATH, got `{s}`"))?;
    Ok(NamedPath {
        name: name.to_string(),
        path: PathBuf::from(path),
    })
}

impl Common {
    fn into_config(self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => read_config(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => {$(
                if self.$f.is_some() {
                    cfg.$f = self.$f;
                }
            )*};
        }
        set!(dataset, data_dir, edges, attributes, nodes, index_base, folds, subset, draws, workers, out, theta, fit, free);
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if !self.covariates.is_empty() {
            cfg.covariates = self.covariates;
        }
        if !self.models.is_empty() {
            cfg.models = self.models;
        }
        if !self.strategies.is_empty() {
            cfg.strategies = self.strategies;
        }
        if let Some(m) = self.method {
            cfg.method = Some(match m {
                MethodArg::Mple => Method::Mple,
                MethodArg::Mcmle => Method::Mcmle,
                MethodArg::Exact => Method::Exact,
            });
        }
        if let Some(m) = self.mc_samples {
            cfg.estimator.mc_samples = m;
        }
        if let Some(m) = self.max_iter {
            cfg.estimator.max_iter = m;
        }
        if self.no_loglik {
            cfg.estimator.compute_loglik = false;
        }
        if self.no_warm_start {
            cfg.warm_start = false;
        }
        if self.no_structural {
            cfg.structural_metrics = false;
        }
        cfg.exact_loo_marginals |= self.exact_loo_marginals;
        cfg.check_fixtures |= self.check_fixtures;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Fit(c) => commands::fit(&c.into_config()?),
        Command::Simulate(c) => commands::simulate(&c.into_config()?),
        Command::Hope(c) => commands::hope(&c.into_config()?),
        Command::VerifyDataset(c) => commands::verify_dataset(&c.into_config()?),
        Command::Partition(c) => commands::partition(&c.into_config()?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
