use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::linalg::{hadamard_gram, solve_gram_right};
use super::state::INIT_STREAM;
use super::SolverConfig;
use crate::diagnostics::{ConvergenceTrace, TracePoint};
use crate::error::{Error, Result};
use crate::exec::{split_seed, Parallelism};
use crate::tensor::{
    khatri_rao_except, metrics_from_rss, residual_sum_squares, unfold, DenseTensor, KruskalModel,
};

/// Batch alternating least squares from a seeded uniform initialization.
///
/// Each sweep solves every mode in turn against the Khatri-Rao product of the
/// others. The trace records one point per sweep, `t` being the sweep index.
pub fn als_fit(x: &DenseTensor, cfg: &SolverConfig) -> Result<(KruskalModel, ConvergenceTrace)> {
    check_problem(x, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(split_seed(cfg.seed, INIT_STREAM));
    let init = KruskalModel::random_uniform(x.dims(), cfg.rank, &mut rng)?;
    als_fit_from(x, init, cfg)
}

/// ALS from a caller-provided initialization.
pub fn als_fit_from(
    x: &DenseTensor,
    init: KruskalModel,
    cfg: &SolverConfig,
) -> Result<(KruskalModel, ConvergenceTrace)> {
    check_problem(x, cfg)?;
    init.check_dims(x.dims())?;
    if init.rank() != cfg.rank {
        return Err(Error::shape("initial model rank differs from configured rank"));
    }
    let unfoldings = (0..x.order())
        .map(|n| unfold(x, n))
        .collect::<Result<Vec<_>>>()?;
    let xnorm = x.frobenius_norm();
    let mut factors = init.into_factors();
    let mut trace = ConvergenceTrace::new();
    let rss0 = residual_sum_squares(x, &KruskalModel::from_factors_unchecked(factors.clone()))?;
    let m0 = metrics_from_rss(rss0, x.len(), xnorm);
    trace.push(TracePoint { t: 0, rmse: m0.rmse, fit: m0.fit, wall_ms: 0.0 })?;
    let mut prev_fit = m0.fit;
    for iter in 1..=cfg.max_epochs {
        for n in 0..factors.len() {
            let kr = khatri_rao_except(&factors, n)?;
            let mttkrp = &unfoldings[n] * kr;
            let gram = hadamard_gram(&factors, n);
            factors[n] = solve_gram_right(&gram, &mttkrp);
            if factors[n].iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence { mode: n, step: iter as u64 });
            }
        }
        let rss = residual_sum_squares(x, &KruskalModel::from_factors_unchecked(factors.clone()))?;
        let met = metrics_from_rss(rss, x.len(), xnorm);
        trace.push(TracePoint { t: iter as u64, rmse: met.rmse, fit: met.fit, wall_ms: 0.0 })?;
        let change = (met.fit - prev_fit).abs() / prev_fit.abs().max(1e-12);
        prev_fit = met.fit;
        if change < cfg.tol {
            break;
        }
    }
    Ok((KruskalModel::new(factors)?, trace))
}

/// Best fit over `restarts` independently seeded ALS runs.
pub fn als_best_of(
    x: &DenseTensor,
    cfg: &SolverConfig,
    restarts: usize,
    par: Parallelism,
) -> Result<(KruskalModel, ConvergenceTrace)> {
    if restarts == 0 {
        return Err(Error::input("need at least one restart"));
    }
    let runs = par.map(restarts, |i| {
        let mut c = cfg.clone();
        c.seed = split_seed(cfg.seed, 0x100 + i as u64);
        als_fit(x, &c)
    });
    let mut best: Option<(KruskalModel, ConvergenceTrace)> = None;
    for run in runs {
        let run = run?;
        let fit = run.1.last().map_or(f64::NEG_INFINITY, |p| p.fit);
        if best
            .as_ref()
            .is_none_or(|b| fit > b.1.last().map_or(f64::NEG_INFINITY, |p| p.fit))
        {
            best = Some(run);
        }
    }
    Ok(best.expect("restarts > 0"))
}

fn check_problem(x: &DenseTensor, cfg: &SolverConfig) -> Result<()> {
    if x.order() < 3 {
        return Err(Error::shape(format!(
            "ALS needs a tensor of order >= 3, got {}",
            x.order()
        )));
    }
    if cfg.rank == 0 {
        return Err(Error::input("rank must be positive"));
    }
    if cfg.max_epochs == 0 {
        return Err(Error::input("max_epochs must be positive"));
    }
    for (mode, &rows) in x.dims().iter().enumerate() {
        if cfg.rank > rows {
            return Err(Error::RankTooLarge { rank: cfg.rank, mode, rows });
        }
    }
    Ok(())
}
