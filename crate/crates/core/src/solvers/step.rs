use rand_distr::{Distribution, StandardNormal};

use super::gradient::slice_gradients;
use super::state::{NoiseRng, Sample, SolverState};
use super::SolverConfig;
use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// One velocity update `v <- gamma * v + (1 - gamma) * g`.
pub fn velocity_update(v: &mut Matrix, g: &Matrix, gamma: f64) {
    v.zip_apply(g, |vi, gi| *vi = gamma * *vi + (1.0 - gamma) * gi);
}

/// `rows x cols` matrix of i.i.d. `N(0, scale^2)` draws, filled row by row.
pub fn perturbation(rng: &mut NoiseRng, rows: usize, cols: usize, scale: f64) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let z: f64 = StandardNormal.sample(rng);
            m[(i, j)] = scale * z;
        }
    }
    m
}

/// Plain stochastic step: `A_n <- A_n + eta(t) G_n` for every mode, all
/// gradients taken at the current point. Velocities are untouched.
pub fn sgd_step(mut state: SolverState, sample: Sample<'_>, cfg: &SolverConfig) -> Result<SolverState> {
    let grads = slice_gradients(sample.slice, sample.row, state.model.factors())?;
    let eta = cfg.step_size(state.step);
    let tm = state.temporal_mode();
    let step = state.step;
    for (n, (f, g)) in state.model.factors_mut().iter_mut().zip(&grads).enumerate() {
        if n == tm {
            let mut row = f.row_mut(sample.row);
            row.zip_apply(&g.row(0), |a, gi| *a += eta * gi);
            check_finite(row.iter(), n, step)?;
        } else {
            f.zip_apply(g, |a, gi| *a += eta * gi);
            check_finite(f.iter(), n, step)?;
        }
    }
    state.step += 1;
    Ok(state)
}

/// Momentum step with perturbation and L1 shrinkage:
///
/// ```text
/// v_n <- gamma v_n + (1 - gamma) G_n
/// A_n <- A_n + eta(t) v_n + eps_n - beta sign(A_n)
/// ```
///
/// `eps_n` and the shrinkage act on the parameters the sample touches: every
/// non-temporal factor and the sampled temporal row. Noise is drawn mode by
/// mode, row by row, and skipped entirely when `noise_sigma == 0`.
pub fn necpd_step(mut state: SolverState, sample: Sample<'_>, cfg: &SolverConfig) -> Result<SolverState> {
    let eta = cfg.step_size(state.step);
    let tm = state.temporal_mode();
    let grads = if cfg.lookahead {
        let shifted: Vec<Matrix> = state
            .model
            .factors()
            .iter()
            .zip(&state.velocities)
            .map(|(f, v)| f + v * (eta * cfg.gamma))
            .collect();
        slice_gradients(sample.slice, sample.row, &shifted)?
    } else {
        slice_gradients(sample.slice, sample.row, state.model.factors())?
    };
    let step = state.step;
    let noise_scale = cfg.noise_scale(eta);
    let SolverState {
        model,
        velocities,
        noise_rng,
        ..
    } = &mut state;
    for (n, ((f, v), g)) in model
        .factors_mut()
        .iter_mut()
        .zip(velocities.iter_mut())
        .zip(&grads)
        .enumerate()
    {
        if n == tm {
            let mut full = Matrix::zeros(v.nrows(), v.ncols());
            full.row_mut(sample.row).copy_from(&g.row(0));
            velocity_update(v, &full, cfg.gamma);
        } else {
            velocity_update(v, g, cfg.gamma);
        }
        let sign = if cfg.beta > 0.0 {
            Some(f.map(|a| a.signum() * (a != 0.0) as u8 as f64))
        } else {
            None
        };
        f.zip_apply(v, |a, vi| *a += eta * vi);
        let (r0, rows) = if n == tm { (sample.row, 1) } else { (0, f.nrows()) };
        if cfg.noise_sigma > 0.0 {
            let eps = perturbation(noise_rng, rows, f.ncols(), noise_scale);
            let mut block = f.rows_mut(r0, rows);
            block += &eps;
        }
        if let Some(sign) = sign {
            let mut block = f.rows_mut(r0, rows);
            block -= sign.rows(r0, rows) * cfg.beta;
        }
        check_finite(f.iter(), n, step)?;
    }
    state.step += 1;
    Ok(state)
}

fn check_finite<'a>(mut it: impl Iterator<Item = &'a f64>, mode: usize, step: u64) -> Result<()> {
    if it.all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Divergence { mode, step })
    }
}
