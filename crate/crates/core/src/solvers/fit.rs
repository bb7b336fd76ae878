use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::state::{Sample, SolverState, SAMPLER_STREAM};
use super::step::{necpd_step, sgd_step};
use super::{Method, SliceOrder, SolverConfig};
use crate::diagnostics::{ConvergenceTrace, TracePoint};
use crate::error::{Error, Result};
use crate::exec::split_seed;
use crate::tensor::{residual_metrics, DenseTensor, KruskalModel};

/// Stream the temporal slices of `x` through [`necpd_step`] from a seeded
/// uniform initialization.
pub fn necpd_fit(
    x: &DenseTensor,
    cfg: &SolverConfig,
    order: SliceOrder,
) -> Result<(KruskalModel, ConvergenceTrace)> {
    let (state, trace) = fit_method(x, cfg, Method::Necpd, order)?;
    Ok((state.into_model(), trace))
}

/// Same loop as [`necpd_fit`] with [`sgd_step`].
pub fn sgd_fit(
    x: &DenseTensor,
    cfg: &SolverConfig,
    order: SliceOrder,
) -> Result<(KruskalModel, ConvergenceTrace)> {
    let (state, trace) = fit_method(x, cfg, Method::Sgd, order)?;
    Ok((state.into_model(), trace))
}

/// Fit with any stochastic method, returning the full solver state so that a
/// stream can continue from it.
pub fn fit_method(
    x: &DenseTensor,
    cfg: &SolverConfig,
    method: Method,
    order: SliceOrder,
) -> Result<(SolverState, ConvergenceTrace)> {
    check_tensor(x)?;
    let cfg = method.effective_config(cfg);
    cfg.validate()?;
    let state = SolverState::init(x.dims(), &cfg)?;
    run_epochs(state, x, &cfg, method, order)
}

/// Continue a fit from an explicit state (for example a hand-built
/// initialization).
pub fn fit_from_state(
    state: SolverState,
    x: &DenseTensor,
    cfg: &SolverConfig,
    method: Method,
    order: SliceOrder,
) -> Result<(SolverState, ConvergenceTrace)> {
    check_tensor(x)?;
    let cfg = method.effective_config(cfg);
    cfg.validate()?;
    state.model.check_dims(x.dims())?;
    run_epochs(state, x, &cfg, method, order)
}

fn check_tensor(x: &DenseTensor) -> Result<()> {
    if x.order() < 3 {
        return Err(Error::shape(format!(
            "stochastic CP needs a tensor of order >= 3, got {}",
            x.order()
        )));
    }
    Ok(())
}

fn run_epochs(
    mut state: SolverState,
    x: &DenseTensor,
    cfg: &SolverConfig,
    method: Method,
    order: SliceOrder,
) -> Result<(SolverState, ConvergenceTrace)> {
    let k = x.dims()[x.order() - 1];
    let slices = (0..k)
        .map(|i| x.last_mode_slice(i))
        .collect::<Result<Vec<_>>>()?;
    if let SliceOrder::Fixed(ref v) = order {
        if v.iter().any(|&i| i >= k) {
            return Err(Error::input("fixed slice order indexes past the last slice"));
        }
    }
    let mut sampler = ChaCha8Rng::seed_from_u64(split_seed(cfg.seed, SAMPLER_STREAM));
    let clock = Instant::now();
    let mut trace = ConvergenceTrace::new();
    let record = |state: &SolverState, trace: &mut ConvergenceTrace| -> Result<f64> {
        let met = residual_metrics(x, &state.model)?;
        trace.push(TracePoint {
            t: state.step,
            rmse: met.rmse,
            fit: met.fit,
            wall_ms: if cfg.record_wall_time {
                clock.elapsed().as_secs_f64() * 1e3
            } else {
                0.0
            },
        })?;
        Ok(met.fit)
    };
    let mut prev_fit = record(&state, &mut trace)?;
    let mut visit: Vec<usize> = (0..k).collect();
    for _epoch in 0..cfg.max_epochs {
        match &order {
            SliceOrder::Shuffled => {
                visit = (0..k).collect();
                visit.shuffle(&mut sampler);
            }
            SliceOrder::Sequential => {}
            SliceOrder::Fixed(v) => visit.clone_from(v),
        }
        for &i in &visit {
            let sample = Sample::new(i, &slices[i]);
            state = match method {
                Method::Sgd => sgd_step(state, sample, cfg)?,
                Method::Psgd | Method::Necpd => necpd_step(state, sample, cfg)?,
            };
            if cfg.trace_every > 0 && state.step.is_multiple_of(cfg.trace_every as u64) {
                record(&state, &mut trace)?;
            }
        }
        let fit = if trace.last().map(|p| p.t) == Some(state.step) {
            trace.last().map(|p| p.fit).unwrap_or(prev_fit)
        } else {
            record(&state, &mut trace)?
        };
        let change = (fit - prev_fit).abs() / prev_fit.abs().max(1e-12);
        prev_fit = fit;
        if change < cfg.tol {
            break;
        }
    }
    Ok((state, trace))
}
