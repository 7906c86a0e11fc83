//! Command-line experiment harness. Every subcommand resolves one
//! configuration (defaults ← `MFDLAB_SEED` ← config file ← flags),
//! validates it up front, and emits self-describing CSV files whose
//! bodies are byte-identical for identical configuration and seed,
//! serial or parallel.

pub mod commands;
pub mod config;
pub mod csvio;

use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use config::{parse_float_list, parse_u32_list, ExperimentConfig, OutputDir, Overrides};

#[derive(Debug, Parser)]
#[command(name = "mfdlab", version, about = "Torus-grid traffic signal lab")]
pub struct Cli {
    /// JSON configuration file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Master seed (default: MFDLAB_SEED environment variable, then 0).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory for emitted files.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    /// Worker threads (0 = all available). Parallel and serial runs
    /// produce identical output bodies.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[arg(long, global = true)]
    pub rows: Option<usize>,

    #[arg(long, global = true)]
    pub cols: Option<usize>,

    /// Mean block length in cells.
    #[arg(long, global = true)]
    pub ell: Option<usize>,

    #[arg(long, global = true)]
    pub lambda: Option<f64>,

    #[arg(long, global = true)]
    pub delta: Option<f64>,

    /// Turning probability.
    #[arg(long, global = true)]
    pub p: Option<f64>,

    /// Policy name, or a comma list for sweeps: lqf, sqf, rnd, neural.
    #[arg(long, global = true)]
    pub policy: Option<String>,

    /// Comma-separated density grid, e.g. 0.1,0.2,0.3.
    #[arg(long, global = true)]
    pub densities: Option<String>,

    /// Replications per density.
    #[arg(long, global = true)]
    pub reps: Option<usize>,

    /// Weights file for the neural policy.
    #[arg(long, global = true)]
    pub weights: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one simulation and record per-step metrics.
    Simulate {
        /// Initial Bernoulli density.
        #[arg(long, default_value_t = 0.5)]
        k: f64,
        #[arg(long, default_value_t = 400)]
        steps: usize,
        /// Also dump the per-step occupancy of every block.
        #[arg(long)]
        dump: bool,
    },
    /// Estimate the MFD of one or more policies.
    Mfd,
    /// Evaluate the extreme cut speeds and their flow lines.
    Cuts,
    /// Analytical flow bands from the binomial intersection model.
    Bernoulli {
        /// Comma-separated cycle indices j.
        #[arg(long, default_value = "1,4,10")]
        j: String,
    },
    /// Train the neural policy with the continuing policy-gradient loop.
    TrainRl {
        /// LQF aggregate CSV to use as the reward baseline
        /// (estimated on the fly when omitted).
        #[arg(long)]
        baseline: Option<PathBuf>,
        /// Constant training density.
        #[arg(long)]
        k: Option<f64>,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Fit the neural policy to the two extreme states.
    TrainSupervised {
        #[arg(long, default_value_t = 0.01)]
        tolerance: f64,
    },
    /// Evaluate randomly drawn policy weights against the LQF baseline.
    RandomSearch {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long)]
        baseline: Option<PathBuf>,
    },
    /// Probe for permanent street colors and detaching flows.
    Detect {
        #[arg(long)]
        k: f64,
        /// Steps to simulate (default: 200 green times).
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        baseline: Option<PathBuf>,
    },
    /// Compare two aggregate MFD CSVs (band overlap and mean ratios).
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Mean-ratio threshold for the competitive verdict.
        #[arg(long, default_value_t = 0.9)]
        ratio: f64,
    },
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var("MFDLAB_SEED") {
        Ok(v) => {
            let seed = v
                .parse::<u64>()
                .with_context(|| format!("invalid parameter `MFDLAB_SEED`: `{v}`"))?;
            Ok(Some(seed))
        }
        Err(_) => Ok(None),
    }
}

impl Cli {
    fn overrides(&self) -> Result<Overrides> {
        Ok(Overrides {
            rows: self.rows,
            cols: self.cols,
            ell: self.ell,
            lambda: self.lambda,
            delta: self.delta,
            p: self.p,
            policy: self.policy.clone(),
            densities: self
                .densities
                .as_deref()
                .map(parse_float_list)
                .transpose()?,
            reps: self.reps,
            seed: self.seed,
            jobs: self.jobs,
        })
    }
}

fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    if jobs == 0 {
        f()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .context("building worker pool")?;
        pool.install(f)
    }
}

/// Parse `args` and execute the subcommand. Usable in-process by tests.
pub fn run_from<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    let mut cfg = ExperimentConfig::resolve(cli.config.as_deref(), &cli.overrides()?, env_seed()?)?;
    if let Command::TrainRl {
        k,
        iterations,
        alpha,
        beta,
        ..
    } = &cli.command
    {
        if let Some(k) = k {
            cfg.training_density = *k;
        }
        if let Some(n) = iterations {
            cfg.iterations = *n;
        }
        if let Some(a) = alpha {
            cfg.alpha = *a;
        }
        if let Some(b) = beta {
            cfg.beta = *b;
        }
        cfg.validate()?;
    }
    let cfg = cfg;
    let out = OutputDir(cli.out.clone());
    let weights = cli.weights.clone();
    let jobs = cfg.jobs;

    with_pool(jobs, move || match &cli.command {
        Command::Simulate { k, steps, dump } => commands::simulate(&cfg, &out, *k, *steps, *dump),
        Command::Mfd => commands::mfd(&cfg, &out, weights.as_ref()),
        Command::Cuts => commands::cuts(&cfg, &out),
        Command::Bernoulli { j } => {
            let cycles = parse_u32_list(j)?;
            commands::bernoulli(&cfg, &out, &cycles)
        }
        Command::TrainRl { baseline, .. } => {
            commands::train_rl(&cfg, &out, baseline.as_ref(), weights.as_ref())
        }
        Command::TrainSupervised { tolerance } => {
            commands::train_supervised_cmd(&cfg, &out, *tolerance)
        }
        Command::RandomSearch { trials, baseline } => {
            commands::random_search_cmd(&cfg, &out, *trials, baseline.as_ref())
        }
        Command::Detect {
            k,
            horizon,
            baseline,
        } => commands::detect(
            &cfg,
            &out,
            *k,
            *horizon,
            baseline.as_ref(),
            weights.as_ref(),
        ),
        Command::Compare { a, b, ratio } => commands::compare(&cfg, &out, a, b, *ratio),
    })
}
