use rand::Rng;

use super::{DenseTensor, Matrix};
use crate::error::{Error, Result};
use crate::exec::Parallelism;

/// Rank-R CP model: one `I_n x R` factor matrix per mode, no weight vector.
#[derive(Debug, Clone, PartialEq)]
pub struct KruskalModel {
    rank: usize,
    factors: Vec<Matrix>,
}

impl KruskalModel {
    pub fn new(factors: Vec<Matrix>) -> Result<Self> {
        if factors.len() < 2 {
            return Err(Error::shape("a Kruskal model needs at least two factors"));
        }
        let rank = factors[0].ncols();
        if rank == 0 {
            return Err(Error::input("rank must be positive"));
        }
        for (n, f) in factors.iter().enumerate() {
            if f.ncols() != rank {
                return Err(Error::shape(format!(
                    "factor {n} has {} columns, expected {rank}",
                    f.ncols()
                )));
            }
            if f.iter().any(|v| !v.is_finite()) {
                return Err(Error::input(format!("factor {n} has non-finite entries")));
            }
        }
        Ok(Self { rank, factors })
    }

    /// Factors with i.i.d. `U[0,1)` entries.
    pub fn random_uniform<R: Rng + ?Sized>(dims: &[usize], rank: usize, rng: &mut R) -> Result<Self> {
        let factors = dims
            .iter()
            .map(|&d| Matrix::from_fn(d, rank, |_, _| rng.random::<f64>()))
            .collect();
        Self::new(factors)
    }

    pub fn zeros(dims: &[usize], rank: usize) -> Result<Self> {
        Self::new(dims.iter().map(|&d| Matrix::zeros(d, rank)).collect())
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn order(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[Matrix] {
        &self.factors
    }

    pub fn factor(&self, mode: usize) -> &Matrix {
        &self.factors[mode]
    }

    pub fn into_factors(self) -> Vec<Matrix> {
        self.factors
    }

    /// Row counts of every factor.
    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.nrows()).collect()
    }

    pub(crate) fn factors_mut(&mut self) -> &mut [Matrix] {
        &mut self.factors
    }

    pub(crate) fn from_factors_unchecked(factors: Vec<Matrix>) -> Self {
        let rank = factors[0].ncols();
        Self { rank, factors }
    }

    /// Apply the same column permutation to every factor.
    pub fn permute_columns(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.rank {
            return Err(Error::shape("permutation length differs from rank"));
        }
        let factors = self
            .factors
            .iter()
            .map(|f| Matrix::from_fn(f.nrows(), self.rank, |i, r| f[(i, perm[r])]))
            .collect();
        Self::new(factors)
    }

    pub(crate) fn check_dims(&self, dims: &[usize]) -> Result<()> {
        if self.dims() != dims {
            return Err(Error::shape(format!(
                "model dims {:?} do not match tensor dims {:?}",
                self.dims(),
                dims
            )));
        }
        Ok(())
    }
}

/// Column-wise Kronecker product: column `r` is `kron(a[:, r], b[:, r])`.
pub fn khatri_rao(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.ncols() != b.ncols() {
        return Err(Error::shape(format!(
            "khatri-rao operands have {} and {} columns",
            a.ncols(),
            b.ncols()
        )));
    }
    let (j, k) = (a.nrows(), b.nrows());
    Ok(Matrix::from_fn(j * k, a.ncols(), |row, r| {
        a[(row / k, r)] * b[(row % k, r)]
    }))
}

/// Khatri-Rao product of every factor except `mode`, folded left in
/// descending mode order (`C ⊙ B` for mode 0 of a three-way model).
pub fn khatri_rao_except(factors: &[Matrix], mode: usize) -> Result<Matrix> {
    let mut others = (0..factors.len()).rev().filter(|&n| n != mode);
    let first = others
        .next()
        .ok_or_else(|| Error::shape("need at least two factors"))?;
    let mut acc = factors[first].clone();
    for n in others {
        acc = khatri_rao(&acc, &factors[n])?;
    }
    Ok(acc)
}

/// Full tensor `sum_r a^(1)_r ∘ ... ∘ a^(N)_r`.
pub fn reconstruct(m: &KruskalModel, dims: &[usize]) -> Result<DenseTensor> {
    reconstruct_with(m, dims, Parallelism::default())
}

/// [`reconstruct`] with an explicit scheduling strategy. Output is identical
/// for every strategy.
pub fn reconstruct_with(m: &KruskalModel, dims: &[usize], par: Parallelism) -> Result<DenseTensor> {
    m.check_dims(dims)?;
    if dims.contains(&0) || dims.len() < 2 {
        return Err(Error::shape(format!("cannot reconstruct dims {dims:?}")));
    }
    let n = dims.len();
    let last = dims[n - 1];
    let total: usize = dims.iter().product();
    let rank = m.rank();
    let factors = m.factors();
    let lead = &dims[..n - 1];
    let mut values = vec![0.0; total];
    // each chunk is one fibre along the last mode
    par.for_each_chunk(&mut values, last, |fibre, out| {
        let mut rem = fibre;
        let mut idx = vec![0usize; n - 1];
        for d in (0..n - 1).rev() {
            idx[d] = rem % lead[d];
            rem /= lead[d];
        }
        let mut prefix = vec![0.0; rank];
        for (r, p) in prefix.iter_mut().enumerate() {
            let mut acc = factors[0][(idx[0], r)];
            for d in 1..n - 1 {
                acc *= factors[d][(idx[d], r)];
            }
            *p = acc;
        }
        let lastf = &factors[n - 1];
        for (k, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for (r, p) in prefix.iter().enumerate() {
                s += p * lastf[(k, r)];
            }
            *o = s;
        }
    });
    Ok(DenseTensor::from_parts_unchecked(dims.to_vec(), values))
}

/// `||X - reconstruct(m)||_F^2`.
pub fn residual_sum_squares(x: &DenseTensor, m: &KruskalModel) -> Result<f64> {
    let xhat = reconstruct(m, x.dims())?;
    Ok(x.values()
        .iter()
        .zip(xhat.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualMetrics {
    /// `||X - X̂||_F / sqrt(#elements)`
    pub rmse: f64,
    /// `1 - ||X - X̂||_F / ||X||_F`; `-inf` for a zero tensor with a nonzero residual.
    pub fit: f64,
}

pub fn residual_metrics(x: &DenseTensor, m: &KruskalModel) -> Result<ResidualMetrics> {
    let rss = residual_sum_squares(x, m)?;
    Ok(metrics_from_rss(rss, x.len(), x.frobenius_norm()))
}

pub(crate) fn metrics_from_rss(rss: f64, len: usize, xnorm: f64) -> ResidualMetrics {
    let r = rss.sqrt();
    let fit = if xnorm > 0.0 {
        1.0 - r / xnorm
    } else if r == 0.0 {
        1.0
    } else {
        f64::NEG_INFINITY
    };
    ResidualMetrics {
        rmse: r / (len as f64).sqrt(),
        fit,
    }
}
