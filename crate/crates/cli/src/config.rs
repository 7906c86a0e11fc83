//! Experiment configuration: defaults, JSON config files and flag
//! overrides, resolved into one self-describing record.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use mfdlab_core::network::NetworkConfig;

pub const CONFIG_VERSION: u32 = 1;

/// Fully resolved experiment configuration. Serialized verbatim into the
/// header of every output file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExperimentConfig {
    pub version: u32,
    pub rows: usize,
    pub cols: usize,
    pub ell: usize,
    pub lambda: f64,
    pub delta: f64,
    pub p: f64,
    pub policy: String,
    pub densities: Vec<f64>,
    pub reps: usize,
    pub warmup_cycles: u32,
    pub measure_cycles: u32,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
    pub training_density: f64,
    pub hidden: usize,
    pub seed: u64,
    pub jobs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            version: CONFIG_VERSION,
            rows: 8,
            cols: 8,
            ell: 10,
            lambda: 1.0,
            delta: 0.0,
            p: 0.75,
            policy: "lqf".into(),
            densities: (1..=9).map(|i| i as f64 / 10.0).collect(),
            reps: 50,
            warmup_cycles: 4,
            measure_cycles: 4,
            alpha: 0.2,
            beta: 0.05,
            iterations: 2000,
            training_density: 0.2,
            hidden: 16,
            seed: 0,
            jobs: 0,
        }
    }
}

/// Partial configuration as read from a JSON file; absent fields keep
/// their defaults.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    version: Option<u32>,
    rows: Option<usize>,
    cols: Option<usize>,
    ell: Option<usize>,
    lambda: Option<f64>,
    delta: Option<f64>,
    p: Option<f64>,
    policy: Option<String>,
    densities: Option<Vec<f64>>,
    reps: Option<usize>,
    warmup_cycles: Option<u32>,
    measure_cycles: Option<u32>,
    alpha: Option<f64>,
    beta: Option<f64>,
    iterations: Option<usize>,
    training_density: Option<f64>,
    hidden: Option<usize>,
    seed: Option<u64>,
    jobs: Option<usize>,
}

/// Flag-level overrides collected by the argument parser.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub rows: Option<usize>,
    pub cols: Option<usize>,
    pub ell: Option<usize>,
    pub lambda: Option<f64>,
    pub delta: Option<f64>,
    pub p: Option<f64>,
    pub policy: Option<String>,
    pub densities: Option<Vec<f64>>,
    pub reps: Option<usize>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
}

impl ExperimentConfig {
    /// Defaults, then the environment seed, then the config file, then
    /// flags; later sources win.
    pub fn resolve(
        config_path: Option<&Path>,
        overrides: &Overrides,
        env_seed: Option<u64>,
    ) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        if let Some(seed) = env_seed {
            cfg.seed = seed;
        }
        if let Some(path) = config_path {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config file {}", path.display()))?;
            let file: FileConfig = serde_json::from_str(&text)
                .with_context(|| format!("parsing config file {}", path.display()))?;
            if let Some(v) = file.version {
                if v != CONFIG_VERSION {
                    bail!("invalid parameter `version`: unsupported config schema {v}");
                }
            }
            macro_rules! take {
                ($($field:ident),*) => {
                    $(if let Some(v) = file.$field { cfg.$field = v; })*
                };
            }
            take!(
                rows,
                cols,
                ell,
                lambda,
                delta,
                p,
                policy,
                densities,
                reps,
                warmup_cycles,
                measure_cycles,
                alpha,
                beta,
                iterations,
                training_density,
                hidden,
                seed,
                jobs
            );
        }
        macro_rules! take_override {
            ($($field:ident),*) => {
                $(if let Some(v) = overrides.$field.clone() { cfg.$field = v; })*
            };
        }
        take_override!(rows, cols, ell, lambda, delta, p, policy, densities, reps, seed, jobs);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Validate every cross-module constraint before any run starts.
    pub fn validate(&self) -> Result<()> {
        self.network().validate()?;
        if self.densities.is_empty() {
            bail!("invalid parameter `densities`: need at least one density");
        }
        if !self.densities.windows(2).all(|w| w[0] < w[1]) {
            bail!("invalid parameter `densities`: must be strictly increasing");
        }
        if self.densities.iter().any(|k| !(0.0..=1.0).contains(k)) {
            bail!("invalid parameter `densities`: values must lie in [0, 1]");
        }
        if self.reps < 2 {
            bail!("invalid parameter `reps`: need at least 2 replications");
        }
        if !(0.0..=1.0).contains(&self.training_density) {
            bail!("invalid parameter `training_density`: must lie in [0, 1]");
        }
        if self.alpha <= 0.0 || self.beta <= 0.0 {
            bail!("invalid parameter `alpha`/`beta`: learning rates must be positive");
        }
        if self.hidden == 0 {
            bail!("invalid parameter `hidden`: width must be positive");
        }
        if self.iterations == 0 {
            bail!("invalid parameter `iterations`: must be at least 1");
        }
        Ok(())
    }

    pub fn network(&self) -> NetworkConfig {
        NetworkConfig {
            rows: self.rows,
            cols: self.cols,
            mean_block_length: self.ell,
            lambda: self.lambda,
            delta: self.delta,
            turn_prob: self.p,
            seed: self.seed,
        }
    }

    /// Canonical single-line JSON echo for output headers.
    pub fn echo(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

/// Comma-separated float list flag (densities, percentile grids).
pub fn parse_float_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .with_context(|| format!("invalid number `{t}` in list"))
        })
        .collect()
}

/// Comma-separated integer list flag.
pub fn parse_u32_list(s: &str) -> Result<Vec<u32>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<u32>()
                .with_context(|| format!("invalid integer `{t}` in list"))
        })
        .collect()
}

/// Where outputs land; created on demand.
#[derive(Debug, Clone)]
pub struct OutputDir(pub PathBuf);

impl OutputDir {
    pub fn file(&self, name: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.0)
            .with_context(|| format!("creating output directory {}", self.0.display()))?;
        Ok(self.0.join(name))
    }
}
