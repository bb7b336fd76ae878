use std::path::PathBuf;

use crate::anomaly::DEFAULT_K;
use crate::error::{Error, Result};
use crate::diagnostics::{rank_scan, select_rank};
use crate::exec::Parallelism;
use crate::solvers::{NoiseScaling, SolverConfig};
use crate::tensor::DenseTensor;

/// Every tunable of the command-line pipeline.
///
/// Text form is one `key = value` per line with keys equal to the field
/// names; `#` starts a comment. Lists are comma separated and optional
/// values accept `auto`.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub dims: Vec<usize>,
    /// `None` picks the rank by core consistency over `1..=rmax`.
    pub rank: Option<usize>,
    pub true_rank: usize,
    pub noise_std: f64,

    pub method: String,
    pub eta0: f64,
    pub gamma: f64,
    pub beta: f64,
    pub noise_sigma: f64,
    pub noise_scaling: NoiseScaling,
    pub lookahead: bool,
    pub max_epochs: usize,
    pub tol: f64,
    pub trace_every: usize,
    pub seed: u64,

    /// Sweep limit for ALS fits (decomposition and rank scans).
    pub als_iters: usize,
    pub restarts: usize,
    pub rmax: usize,
    pub target_rmse: f64,

    pub nu: f64,
    pub k: usize,
    pub sigma: Option<f64>,
    pub bootstrap_fraction: f64,
    pub trials: usize,
    /// Leading manifest events used to train a stream; `None` takes the
    /// first `bootstrap_fraction` of the healthy events.
    pub train_window: Option<usize>,

    pub n_healthy: usize,
    pub n_mild: usize,
    pub n_severe: usize,
    pub locations: usize,
    pub samples: usize,
    pub sample_rate_hz: f64,
    pub damage_location: usize,
    pub mild_severity: f64,
    pub severe_severity: f64,

    pub n_freq: usize,
    pub diff_adjacent: bool,

    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let solver = SolverConfig::new(1);
        Self {
            dims: vec![20, 6, 2000],
            rank: None,
            true_rank: 3,
            noise_std: 0.0,
            method: "necpd".into(),
            // The full inverse-time schedule (eta0 = 1) overshoots on
            // feature-sized slices; see the README.
            eta0: 0.01,
            gamma: solver.gamma,
            beta: solver.beta,
            noise_sigma: solver.noise_sigma,
            noise_scaling: solver.noise_scaling,
            lookahead: solver.lookahead,
            max_epochs: solver.max_epochs,
            tol: solver.tol,
            trace_every: solver.trace_every,
            seed: 0,
            als_iters: 200,
            restarts: 5,
            rmax: 5,
            target_rmse: 0.1,
            nu: 0.05,
            k: DEFAULT_K,
            sigma: None,
            bootstrap_fraction: 0.8,
            trials: 10,
            train_window: None,
            n_healthy: 125,
            n_mild: 107,
            n_severe: 30,
            locations: 24,
            samples: 1200,
            sample_rate_hz: 600.0,
            damage_location: 7,
            mild_severity: 1.0,
            severe_severity: 2.0,
            n_freq: 600,
            diff_adjacent: false,
            input: None,
            output: None,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Parse(format!("{key}: cannot parse {v:?}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Parse(format!("{key}: expected a boolean, got {v:?}"))),
    }
}

fn parse_opt<T: std::str::FromStr>(key: &str, v: &str) -> Result<Option<T>> {
    if v.eq_ignore_ascii_case("auto") || v.is_empty() {
        Ok(None)
    } else {
        parse(key, v).map(Some)
    }
}

impl PipelineConfig {
    /// Parse `key = value` text on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected `key = value`", n + 1)))?;
            cfg.set(k.trim(), v.trim())
                .map_err(|e| Error::Parse(format!("line {}: {e}", n + 1)))?;
        }
        Ok(cfg)
    }

    /// Set one field from its text form.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "dims" => {
                self.dims = v
                    .split(',')
                    .map(|d| parse(key, d.trim()))
                    .collect::<Result<_>>()?
            }
            "rank" => self.rank = parse_opt(key, v)?,
            "true_rank" => self.true_rank = parse(key, v)?,
            "noise_std" => self.noise_std = parse(key, v)?,
            "method" => self.method = v.to_ascii_lowercase(),
            "eta0" => self.eta0 = parse(key, v)?,
            "gamma" => self.gamma = parse(key, v)?,
            "beta" => self.beta = parse(key, v)?,
            "noise_sigma" => self.noise_sigma = parse(key, v)?,
            "noise_scaling" => {
                self.noise_scaling = match v.to_ascii_lowercase().as_str() {
                    "constant" => NoiseScaling::Constant,
                    "step_size" | "step" => NoiseScaling::StepSize,
                    _ => return Err(Error::Parse(format!("{key}: expected constant or step_size, got {v:?}"))),
                }
            }
            "lookahead" => self.lookahead = parse_bool(key, v)?,
            "max_epochs" => self.max_epochs = parse(key, v)?,
            "tol" => self.tol = parse(key, v)?,
            "trace_every" => self.trace_every = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "als_iters" => self.als_iters = parse(key, v)?,
            "restarts" => self.restarts = parse(key, v)?,
            "rmax" => self.rmax = parse(key, v)?,
            "target_rmse" => self.target_rmse = parse(key, v)?,
            "nu" => self.nu = parse(key, v)?,
            "k" => self.k = parse(key, v)?,
            "sigma" => self.sigma = parse_opt(key, v)?,
            "bootstrap_fraction" => self.bootstrap_fraction = parse(key, v)?,
            "trials" => self.trials = parse(key, v)?,
            "train_window" => self.train_window = parse_opt(key, v)?,
            "n_healthy" => self.n_healthy = parse(key, v)?,
            "n_mild" => self.n_mild = parse(key, v)?,
            "n_severe" => self.n_severe = parse(key, v)?,
            "locations" => self.locations = parse(key, v)?,
            "samples" => self.samples = parse(key, v)?,
            "sample_rate_hz" => self.sample_rate_hz = parse(key, v)?,
            "damage_location" => self.damage_location = parse(key, v)?,
            "mild_severity" => self.mild_severity = parse(key, v)?,
            "severe_severity" => self.severe_severity = parse(key, v)?,
            "n_freq" => self.n_freq = parse(key, v)?,
            "diff_adjacent" => self.diff_adjacent = parse_bool(key, v)?,
            "input" => self.input = (!v.is_empty()).then(|| PathBuf::from(v)),
            "output" => self.output = (!v.is_empty()).then(|| PathBuf::from(v)),
            _ => return Err(Error::Parse(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.solver(self.rank.unwrap_or(1)).validate()?;
        if self.als_iters == 0 {
            return Err(Error::input("als_iters must be positive"));
        }
        if self.rmax == 0 {
            return Err(Error::input("rmax must be positive"));
        }
        if !(self.bootstrap_fraction > 0.0 && self.bootstrap_fraction < 1.0) {
            return Err(Error::input(format!(
                "bootstrap_fraction must be in (0, 1), got {}",
                self.bootstrap_fraction
            )));
        }
        if self.trials == 0 {
            return Err(Error::input("trials must be at least 1"));
        }
        if !(self.nu > 0.0 && self.nu < 1.0) {
            return Err(Error::input(format!("nu must be in (0, 1), got {}", self.nu)));
        }
        Ok(())
    }

    /// Solver hyperparameters carried by this configuration, at `rank`.
    pub fn solver(&self, rank: usize) -> SolverConfig {
        SolverConfig {
            rank,
            eta0: self.eta0,
            gamma: self.gamma,
            beta: self.beta,
            noise_sigma: self.noise_sigma,
            noise_scaling: self.noise_scaling,
            lookahead: self.lookahead,
            max_epochs: self.max_epochs,
            tol: self.tol,
            seed: self.seed,
            trace_every: self.trace_every,
            record_wall_time: false,
        }
    }
}

impl PipelineConfig {
    /// Solver settings for ALS: as [`Self::solver`] with `als_iters` sweeps.
    pub fn als_solver(&self, rank: usize) -> SolverConfig {
        let mut s = self.solver(rank);
        s.max_epochs = self.als_iters;
        s
    }

    /// The configured rank, or the largest rank in `1..=rmax` whose core
    /// consistency on `x` reaches the acceptance threshold.
    pub fn resolve_rank(&self, x: &DenseTensor, par: Parallelism) -> Result<usize> {
        if let Some(r) = self.rank {
            return Ok(r);
        }
        let rows = rank_scan(x, self.rmax, &self.als_solver(1), self.restarts.max(1), par)?;
        Ok(select_rank(&rows))
    }
}
