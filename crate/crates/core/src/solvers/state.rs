use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::SolverConfig;
use crate::error::{Error, Result};
use crate::exec::split_seed;
use crate::tensor::{DenseTensor, KruskalModel, Matrix};

pub(crate) const INIT_STREAM: u64 = 0x1;
pub(crate) const NOISE_STREAM: u64 = 0x2;
pub(crate) const SAMPLER_STREAM: u64 = 0x3;

/// Generator used for perturbation draws.
pub type NoiseRng = ChaCha8Rng;

/// One stochastic sample: a temporal slice and the temporal row it belongs to.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub row: usize,
    /// Tensor over the non-temporal modes.
    pub slice: &'a DenseTensor,
}

impl<'a> Sample<'a> {
    pub fn new(row: usize, slice: &'a DenseTensor) -> Self {
        Self { row, slice }
    }
}

/// Mutable solver state. The last mode of the model is the temporal mode.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub(crate) model: KruskalModel,
    pub(crate) velocities: Vec<Matrix>,
    pub(crate) step: u64,
    pub(crate) noise_rng: NoiseRng,
}

impl SolverState {
    /// Seeded `U[0,1)` factors, zero velocities, `t = 0`.
    pub fn init(dims: &[usize], cfg: &SolverConfig) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(split_seed(cfg.seed, INIT_STREAM));
        let model = KruskalModel::random_uniform(dims, cfg.rank, &mut rng)?;
        Ok(Self::from_model(model, cfg))
    }

    /// Start from an existing model with zero velocities and `t = 0`.
    pub fn from_model(model: KruskalModel, cfg: &SolverConfig) -> Self {
        let velocities = model
            .factors()
            .iter()
            .map(|f| Matrix::zeros(f.nrows(), f.ncols()))
            .collect();
        Self {
            model,
            velocities,
            step: 0,
            noise_rng: ChaCha8Rng::seed_from_u64(split_seed(cfg.seed, NOISE_STREAM)),
        }
    }

    /// State for a pure stream: seeded non-temporal factors and an empty
    /// temporal factor that grows with every online update.
    pub fn for_stream(nontemporal_dims: &[usize], cfg: &SolverConfig) -> Result<Self> {
        if nontemporal_dims.len() < 2 {
            return Err(Error::shape("a stream needs at least two non-temporal modes"));
        }
        let mut dims = nontemporal_dims.to_vec();
        dims.push(0);
        Self::init(&dims, cfg)
    }

    pub fn model(&self) -> &KruskalModel {
        &self.model
    }

    pub fn into_model(self) -> KruskalModel {
        self.model
    }

    pub fn velocities(&self) -> &[Matrix] {
        &self.velocities
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    /// Clone of the perturbation generator, positioned at the next draw.
    pub fn noise_rng(&self) -> NoiseRng {
        self.noise_rng.clone()
    }

    pub(crate) fn temporal_mode(&self) -> usize {
        self.model.order() - 1
    }
}
