use crate::error::{Error, Result};

/// How the Gaussian perturbation is scaled at step `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseScaling {
    /// `eps ~ N(0, sigma^2)` regardless of the step size.
    Constant,
    /// `eps ~ N(0, (eta(t) * sigma)^2)`, so the injected variance is summable
    /// under the inverse-time schedule.
    #[default]
    StepSize,
}

/// Hyperparameters shared by every stochastic and batch solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub rank: usize,
    /// Base step size; the schedule is `eta(t) = eta0 / (1 + t)`.
    pub eta0: f64,
    /// Friction of the velocity recurrence, in `[0, 1)`.
    pub gamma: f64,
    /// L1 shrinkage coefficient.
    pub beta: f64,
    /// Standard deviation of the additive Gaussian perturbation.
    pub noise_sigma: f64,
    pub noise_scaling: NoiseScaling,
    /// Evaluate the gradient at the look-ahead point `A + eta(t) * gamma * v`
    /// instead of at `A`.
    pub lookahead: bool,
    pub max_epochs: usize,
    /// Stop when the relative change in fit over one epoch drops below this.
    pub tol: f64,
    pub seed: u64,
    /// Record a trace point every this many steps; 0 records once per epoch.
    pub trace_every: usize,
    /// Fill `wall_ms` in traces from a monotonic clock. Off by default so
    /// traces are reproducible byte for byte.
    pub record_wall_time: bool,
}

impl SolverConfig {
    pub fn new(rank: usize) -> Self {
        Self {
            rank,
            eta0: 1.0,
            gamma: 0.9,
            beta: 0.0,
            noise_sigma: 1e-2,
            noise_scaling: NoiseScaling::default(),
            lookahead: false,
            max_epochs: 10,
            tol: 1e-6,
            seed: 0,
            trace_every: 0,
            record_wall_time: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::input("rank must be positive"));
        }
        if !(self.eta0 > 0.0 && self.eta0.is_finite()) {
            return Err(Error::input(format!("eta0 must be positive, got {}", self.eta0)));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::input(format!("gamma must be in [0, 1), got {}", self.gamma)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::input(format!("beta must be >= 0, got {}", self.beta)));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::input(format!(
                "noise_sigma must be >= 0, got {}",
                self.noise_sigma
            )));
        }
        if self.max_epochs == 0 {
            return Err(Error::input("max_epochs must be positive"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::input(format!("tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }

    /// `eta(t) = eta0 / (1 + t)`.
    pub fn step_size(&self, t: u64) -> f64 {
        self.eta0 / (1.0 + t as f64)
    }

    pub(crate) fn noise_scale(&self, eta: f64) -> f64 {
        match self.noise_scaling {
            NoiseScaling::Constant => self.noise_sigma,
            NoiseScaling::StepSize => self.noise_sigma * eta,
        }
    }
}

/// The stochastic solver variants compared in the convergence study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Plain stochastic gradient steps.
    Sgd,
    /// Perturbed SGD: momentum-form step with `gamma = beta = 0`.
    Psgd,
    /// Momentum, perturbation and L1 shrinkage as configured.
    Necpd,
}

impl Method {
    /// The configuration this method actually runs with.
    pub fn effective_config(self, cfg: &SolverConfig) -> SolverConfig {
        let mut c = cfg.clone();
        match self {
            Method::Sgd => {
                c.gamma = 0.0;
                c.beta = 0.0;
                c.noise_sigma = 0.0;
            }
            Method::Psgd => {
                c.gamma = 0.0;
                c.beta = 0.0;
            }
            Method::Necpd => {}
        }
        c
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sgd" => Ok(Method::Sgd),
            "psgd" => Ok(Method::Psgd),
            "necpd" => Ok(Method::Necpd),
            other => Err(Error::Parse(format!("unknown method {other:?}"))),
        }
    }
}

/// Order in which temporal slices are visited within an epoch.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum SliceOrder {
    /// Fresh seeded permutation every epoch.
    #[default]
    Shuffled,
    Sequential,
    /// Explicit visiting order, reused every epoch.
    Fixed(Vec<usize>),
}
