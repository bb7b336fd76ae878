//! Core consistency: how close the least-squares Tucker core of a tensor,
//! taken against a CP model's factors, is to the superdiagonal identity core.

use crate::error::{Error, Result};
use crate::exec::Parallelism;
use crate::solvers::{als_best_of, SolverConfig};
use crate::tensor::{mode_product, DenseTensor, KruskalModel, Matrix};

/// Rank-scan acceptance threshold, in percent.
pub const CORCONDIA_ACCEPT: f64 = 90.0;

const PINV_RTOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corcondia {
    /// `100 * (1 - ||G - T||_F^2 / R)`; may be negative.
    pub score: f64,
    /// Some factor had singular values below `1e-10 * sigma_max`.
    pub ill_conditioned: bool,
}

pub fn corcondia(x: &DenseTensor, m: &KruskalModel) -> Result<Corcondia> {
    m.check_dims(x.dims())?;
    let rank = m.rank();
    let mut ill_conditioned = false;
    let mut core = x.clone();
    for (n, f) in balanced(m.factors()).iter().enumerate() {
        let (pinv, deficient) = truncated_pinv(f);
        ill_conditioned |= deficient;
        core = mode_product(&core, &pinv, n)?;
    }
    let order = m.order();
    let mut dist = 0.0;
    crate::tensor::for_each_index(core.dims(), |idx, lin| {
        let superdiag = idx.iter().all(|&i| i == idx[0]);
        let target = if superdiag { 1.0 } else { 0.0 };
        let d = core.values()[lin] - target;
        dist += d * d;
    });
    debug_assert_eq!(core.dims(), vec![rank; order].as_slice());
    Ok(Corcondia {
        score: 100.0 * (1.0 - dist / rank as f64),
        ill_conditioned,
    })
}

/// Rescale every component so its column has the same norm in each mode.
/// The components are unchanged, but the core no longer depends on how
/// scale was split between modes.
fn balanced(factors: &[Matrix]) -> Vec<Matrix> {
    let mut out = factors.to_vec();
    let n = factors.len() as f64;
    for r in 0..factors[0].ncols() {
        let norms: Vec<f64> = factors.iter().map(|f| f.column(r).norm()).collect();
        if norms.contains(&0.0) {
            continue;
        }
        let geo = (norms.iter().map(|v| v.ln()).sum::<f64>() / n).exp();
        for (f, norm) in out.iter_mut().zip(&norms) {
            f.column_mut(r).scale_mut(geo / norm);
        }
    }
    out
}

/// Moore-Penrose pseudo-inverse with singular values below
/// `1e-10 * sigma_max` discarded. Also reports whether any were discarded.
fn truncated_pinv(a: &Matrix) -> (Matrix, bool) {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0f64, |m, &s| m.max(s));
    let cutoff = PINV_RTOL * smax;
    let deficient = smax == 0.0 || svd.singular_values.iter().any(|&s| s <= cutoff);
    let u = svd.u.as_ref().expect("requested U");
    let vt = svd.v_t.as_ref().expect("requested V^T");
    let mut pinv = Matrix::zeros(a.ncols(), a.nrows());
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff {
            pinv += (vt.row(k).transpose() * u.column(k).transpose()) / s;
        }
    }
    (pinv, deficient)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankScanRow {
    pub rank: usize,
    pub corcondia: f64,
    pub fit: f64,
    pub ill_conditioned: bool,
}

/// Fit ALS (best of `restarts`) for every rank in `1..=rmax` and score each.
pub fn rank_scan(
    x: &DenseTensor,
    rmax: usize,
    cfg: &SolverConfig,
    restarts: usize,
    par: Parallelism,
) -> Result<Vec<RankScanRow>> {
    if rmax == 0 {
        return Err(Error::input("rmax must be positive"));
    }
    par.map(rmax, |i| {
        let mut c = cfg.clone();
        c.rank = i + 1;
        let (model, trace) = als_best_of(x, &c, restarts, Parallelism::Sequential)?;
        let cc = corcondia(x, &model)?;
        Ok(RankScanRow {
            rank: c.rank,
            corcondia: cc.score,
            fit: trace.last().map_or(f64::NAN, |p| p.fit),
            ill_conditioned: cc.ill_conditioned,
        })
    })
    .into_iter()
    .collect()
}

/// Largest rank whose score reaches [`CORCONDIA_ACCEPT`]; 1 when none does.
pub fn select_rank(rows: &[RankScanRow]) -> usize {
    rows.iter()
        .filter(|r| r.corcondia >= CORCONDIA_ACCEPT)
        .map(|r| r.rank)
        .max()
        .unwrap_or(1)
}
