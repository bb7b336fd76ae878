use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{EventRecord, Label, PipelineConfig};
use crate::error::{Error, Result};
use crate::exec::split_seed;
use crate::tensor::{reconstruct, DenseTensor, KruskalModel};

/// Random CP tensor: i.i.d. `U[0, 1]` factors, reconstructed, plus optional
/// i.i.d. Gaussian noise of standard deviation `noise_std`.
pub fn synth_cp(dims: &[usize], rank: usize, noise_std: f64, seed: u64) -> Result<(DenseTensor, KruskalModel)> {
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(Error::input(format!("noise_std must be >= 0, got {noise_std}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(split_seed(seed, 0));
    let truth = KruskalModel::random_uniform(dims, rank, &mut rng)?;
    let x = reconstruct(&truth, dims)?;
    if noise_std == 0.0 {
        return Ok((x, truth));
    }
    let mut noise = ChaCha8Rng::seed_from_u64(split_seed(seed, 1));
    let dims = x.dims().to_vec();
    let values = x
        .into_values()
        .into_iter()
        .map(|v| v + noise_std * noise.sample::<f64, _>(StandardNormal))
        .collect();
    Ok((DenseTensor::new(dims, values)?, truth))
}

/// Parameters of the synthetic structural-monitoring generator.
#[derive(Debug, Clone, PartialEq)]
pub struct ShmParams {
    pub n_healthy: usize,
    /// `(class label, event count, severity)` per damage class.
    pub damage: Vec<(String, usize, f64)>,
    pub locations: usize,
    pub samples: usize,
    pub sample_rate_hz: f64,
    pub damage_location: usize,
    pub seed: u64,
}

impl ShmParams {
    pub fn from_config(cfg: &PipelineConfig) -> Self {
        Self {
            n_healthy: cfg.n_healthy,
            damage: vec![
                ("mild".into(), cfg.n_mild, cfg.mild_severity),
                ("severe".into(), cfg.n_severe, cfg.severe_severity),
            ],
            locations: cfg.locations,
            samples: cfg.samples,
            sample_rate_hz: cfg.sample_rate_hz,
            damage_location: cfg.damage_location,
            seed: cfg.seed,
        }
    }
}

// Healthy structure: a few lightly damped modes seen by every sensor with
// nearly the same shape, plus sensor noise.
const MODE_HZ: [f64; 4] = [7.3, 18.9, 33.1, 52.6];
const SHAPE_SPREAD: f64 = 0.03;
const FREQ_JITTER: f64 = 0.002;
const WEIGHT_JITTER: f64 = 0.05;
const SENSOR_NOISE: f64 = 0.4;
// Damage: stiffness loss lowers every modal frequency, and the damaged joint
// rattles at its own frequency, half as strongly at its neighbours.
const FREQ_DROP_PER_SEVERITY: f64 = 0.008;
const RATTLE_HZ: f64 = 41.7;
const RATTLE_PER_SEVERITY: f64 = 0.8;

/// Simulated acceleration events: healthy events first, then each damage
/// class in order.
///
/// Severity scales both damage effects linearly, so severity 0 events are
/// drawn from the healthy distribution.
pub fn synth_shm(p: &ShmParams) -> Result<Vec<EventRecord>> {
    if p.locations == 0 || p.samples < 2 {
        return Err(Error::input("synth_shm needs at least one location and two samples"));
    }
    if p.damage_location >= p.locations {
        return Err(Error::input(format!(
            "damage_location {} is outside 0..{}",
            p.damage_location, p.locations
        )));
    }
    if let Some((c, _, s)) = p.damage.iter().find(|d| !(d.2 >= 0.0 && d.2.is_finite())) {
        return Err(Error::input(format!("class {c}: severity must be >= 0, got {s}")));
    }
    let mut structure = ChaCha8Rng::seed_from_u64(split_seed(p.seed, 0));
    let shapes: Vec<Vec<f64>> = (0..p.locations)
        .map(|_| {
            MODE_HZ
                .iter()
                .map(|_| 1.0 + SHAPE_SPREAD * structure.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    let mut plan: Vec<(Label, f64)> = vec![(Label::Healthy, 0.0); p.n_healthy];
    for (class, n, s) in &p.damage {
        let label: Label = class.parse()?;
        plan.extend(std::iter::repeat_n((label, *s), *n));
    }
    let mut events = Vec::with_capacity(plan.len());
    for (idx, (label, severity)) in plan.into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(split_seed(p.seed, 1 + idx as u64));
        let mut normal = || rng.sample::<f64, _>(StandardNormal);
        let freqs: Vec<f64> = MODE_HZ
            .iter()
            .map(|f| f * (1.0 + FREQ_JITTER * normal()) * (1.0 - FREQ_DROP_PER_SEVERITY * severity))
            .collect();
        let weights: Vec<f64> = MODE_HZ.iter().map(|_| 1.0 + WEIGHT_JITTER * normal()).collect();
        let mut signals = Vec::with_capacity(p.locations);
        for (l, shape) in shapes.iter().enumerate() {
            let phases: Vec<f64> = (0..MODE_HZ.len() + 1).map(|_| rng.random::<f64>() * 2.0 * PI).collect();
            let rattle = match l.abs_diff(p.damage_location) {
                0 => RATTLE_PER_SEVERITY * severity,
                1 => 0.5 * RATTLE_PER_SEVERITY * severity,
                _ => 0.0,
            };
            let sig = (0..p.samples)
                .map(|i| {
                    let t = i as f64 / p.sample_rate_hz;
                    let mut v: f64 = (0..MODE_HZ.len())
                        .map(|m| weights[m] * shape[m] * (2.0 * PI * freqs[m] * t + phases[m]).sin())
                        .sum();
                    v += rattle * (2.0 * PI * RATTLE_HZ * t + phases[MODE_HZ.len()]).sin();
                    v + SENSOR_NOISE * rng.sample::<f64, _>(StandardNormal)
                })
                .collect();
            signals.push(sig);
        }
        events.push(EventRecord::new(format!("ev{idx:04}"), signals, p.sample_rate_hz, label)?);
    }
    Ok(events)
}
