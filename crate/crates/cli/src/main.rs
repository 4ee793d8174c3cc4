mod commands;
mod source;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use source::ModelArgs;

#[derive(Debug, Parser)]
#[command(
    name = "symrb",
    version,
    about = "Symmetry-aware marginal estimation for log-linear models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ground a template and write `<out>.model` and `<out>.group`.
    Generate {
        #[command(flatten)]
        source: ModelArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output path prefix.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the Gibbs sampler and dump sample points.
    Sample {
        #[command(flatten)]
        source: ModelArgs,
        #[command(flatten)]
        sampler: SamplerArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate marginals with the standard and/or orbit-averaged estimator.
    Estimate {
        #[command(flatten)]
        source: ModelArgs,
        #[command(flatten)]
        sampler: SamplerArgs,
        /// Query such as `smokes(A)=1` or `smokes_A=1,cancer_A=0`; repeatable.
        /// Without a query every single-variable marginal is estimated.
        #[arg(long)]
        query: Vec<String>,
        /// standard, rb or both.
        #[arg(long, default_value = "both")]
        estimator: String,
        /// Read sample points from a dump instead of sampling.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact marginals by enumeration.
    Exact {
        #[command(flatten)]
        source: ModelArgs,
        #[arg(long)]
        query: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Orbit partition, lumpability, mixing times and bias checks of the Gibbs chain.
    Analyze {
        #[command(flatten)]
        source: ModelArgs,
        /// Query for the bias check; repeatable.
        #[arg(long)]
        query: Vec<String>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.25, 0.1, 0.01])]
        epsilons: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for the CSV tables.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// KL/MSE curves of the estimators against exact marginals.
    Bench {
        #[command(flatten)]
        source: ModelArgs,
        #[command(flatten)]
        sampler: SamplerArgs,
        /// standard, rb or both.
        #[arg(long, default_value = "both")]
        estimator: String,
        /// Comma-separated sample counts.
        #[arg(long, value_delimiter = ',', default_values_t = [100, 1000, 10000])]
        checkpoints: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        runs: usize,
        /// Reference marginals (`variable,value,probability`) instead of exact inference.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Domain sizes for a scaling table, e.g. `2,3,4`; needs --target-kl.
        #[arg(long, value_delimiter = ',')]
        domains: Vec<usize>,
        /// Average KL to reach in the scaling table.
        #[arg(long)]
        target_kl: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Args)]
struct SamplerArgs {
    /// Sample points per chain.
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    burnin: usize,
    #[arg(long, default_value_t = 1)]
    thin: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    chains: usize,
    /// random or systematic.
    #[arg(long, default_value = "random")]
    scan: String,
}

impl SamplerArgs {
    fn config(&self) -> Result<symrb::SamplerConfig> {
        let scan = match self.scan.as_str() {
            "random" => symrb::ScanOrder::Random,
            "systematic" => symrb::ScanOrder::Systematic,
            other => anyhow::bail!("unknown scan order `{other}`"),
        };
        let config = symrb::SamplerConfig {
            burn_in: self.burnin,
            samples: self.samples,
            thinning: self.thin,
            seed: self.seed,
            chains: self.chains,
            scan,
        };
        config.validate()?;
        Ok(config)
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { source, seed, out } => commands::generate(&source, seed, &out),
        Command::Sample {
            source,
            sampler,
            out,
        } => {
            let config = sampler.config()?;
            commands::sample(&source, &config, output(out.as_deref())?)
        }
        Command::Estimate {
            source,
            sampler,
            query,
            estimator,
            input,
            out,
        } => {
            let config = sampler.config()?;
            let kinds = commands::parse_estimators(&estimator)?;
            commands::estimate(
                &source,
                &config,
                &query,
                &kinds,
                input.as_deref(),
                output(out.as_deref())?,
            )
        }
        Command::Exact {
            source,
            query,
            seed,
            out,
        } => commands::exact(&source, &query, seed, output(out.as_deref())?),
        Command::Analyze {
            source,
            query,
            epsilons,
            seed,
            out,
        } => commands::analyze(&source, &query, &epsilons, seed, out.as_deref()),
        Command::Bench {
            source,
            sampler,
            estimator,
            checkpoints,
            runs,
            truth,
            domains,
            target_kl,
            out,
        } => {
            let config = sampler.config()?;
            let kinds = commands::parse_estimators(&estimator)?;
            let out = output(out.as_deref())?;
            match target_kl {
                Some(target) => {
                    commands::scaling(&source, &config, &checkpoints, runs, &domains, target, out)
                }
                None => commands::bench(
                    &source,
                    &config,
                    &kinds,
                    &checkpoints,
                    runs,
                    truth.as_deref(),
                    out,
                ),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
