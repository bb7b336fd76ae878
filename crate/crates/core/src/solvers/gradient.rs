use crate::error::{Error, Result};
use crate::tensor::{for_each_index, DenseTensor, KruskalModel, Matrix};

/// Residual-form mode gradients `G_n = (X_(n) - A_n KR_n^T) KR_n` for every
/// mode, where `KR_n` is the Khatri-Rao product of the other factors.
///
/// `G_n` equals the gradient of `-1/2 ||X - [[A_1..A_N]]||_F^2` with respect to
/// `A_n`, so adding a positive multiple of it decreases the loss.
pub fn mode_gradients(x: &DenseTensor, m: &KruskalModel) -> Result<Vec<Matrix>> {
    m.check_dims(x.dims())?;
    let refs: Vec<&Matrix> = m.factors().iter().collect();
    Ok(block_gradients(x.dims(), x.values(), &refs))
}

/// Gradients restricted to one temporal slice.
///
/// `slice` holds the non-temporal modes; the temporal factor contributes only
/// row `row`. The last returned matrix is the `1 x R` gradient of that row.
pub(crate) fn slice_gradients(
    slice: &DenseTensor,
    row: usize,
    factors: &[Matrix],
) -> Result<Vec<Matrix>> {
    let n = factors.len();
    let expect: Vec<usize> = factors[..n - 1].iter().map(|f| f.nrows()).collect();
    if slice.dims() != expect.as_slice() {
        return Err(Error::shape(format!(
            "slice dims {:?} do not match non-temporal factor rows {:?}",
            slice.dims(),
            expect
        )));
    }
    let temporal = &factors[n - 1];
    if row >= temporal.nrows() {
        return Err(Error::shape(format!(
            "temporal row {row} out of range 0..{}",
            temporal.nrows()
        )));
    }
    let trow = temporal.rows(row, 1).into_owned();
    let mut refs: Vec<&Matrix> = factors[..n - 1].iter().collect();
    refs.push(&trow);
    let mut dims = expect;
    dims.push(1);
    Ok(block_gradients(&dims, slice.values(), &refs))
}

/// Accumulates `residual * prod_{m != n} F_m[i_m, r]` into `G_n[i_n, r]` over
/// every entry of a row-major block.
fn block_gradients(dims: &[usize], values: &[f64], factors: &[&Matrix]) -> Vec<Matrix> {
    let n = dims.len();
    let rank = factors[0].ncols();
    let mut grads: Vec<Matrix> = dims.iter().map(|&d| Matrix::zeros(d, rank)).collect();
    // prefix[m * rank + r] = prod_{j < m} F_j[i_j, r]; suffix likewise for j > m
    let mut prefix = vec![1.0; (n + 1) * rank];
    let mut suffix = vec![1.0; (n + 1) * rank];
    for_each_index(dims, |idx, lin| {
        for r in 0..rank {
            for m in 0..n {
                prefix[(m + 1) * rank + r] = prefix[m * rank + r] * factors[m][(idx[m], r)];
            }
            for m in (0..n).rev() {
                suffix[m * rank + r] = suffix[(m + 1) * rank + r] * factors[m][(idx[m], r)];
            }
        }
        let xhat: f64 = (0..rank).map(|r| prefix[n * rank + r]).sum();
        let res = values[lin] - xhat;
        if res == 0.0 {
            return;
        }
        for (m, g) in grads.iter_mut().enumerate() {
            for r in 0..rank {
                g[(idx[m], r)] += res * prefix[m * rank + r] * suffix[(m + 1) * rank + r];
            }
        }
    });
    grads
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{khatri_rao_except, reconstruct, residual_sum_squares, unfold};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_model_has_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = KruskalModel::random_uniform(&[3, 4, 5], 2, &mut rng).unwrap();
        let x = reconstruct(&m, &[3, 4, 5]).unwrap();
        for g in mode_gradients(&x, &m).unwrap() {
            assert!(g.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn zero_factors_are_a_stationary_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = DenseTensor::from_fn(vec![3, 4, 5], |_| rng.random::<f64>()).unwrap();
        let m = KruskalModel::zeros(&[3, 4, 5], 3).unwrap();
        for g in mode_gradients(&x, &m).unwrap() {
            assert!(g.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn matches_matricized_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = KruskalModel::random_uniform(&[4, 3, 5], 2, &mut rng).unwrap();
        let x = DenseTensor::from_fn(vec![4, 3, 5], |_| rng.random::<f64>()).unwrap();
        let grads = mode_gradients(&x, &m).unwrap();
        for n in 0..3 {
            let kr = khatri_rao_except(m.factors(), n).unwrap();
            let want = (unfold(&x, n).unwrap() - m.factor(n) * kr.transpose()) * &kr;
            assert!((&grads[n] - &want).abs().max() < 1e-12);
        }
    }

    #[test]
    fn matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let dims = [4, 3, 5];
        let m = KruskalModel::random_uniform(&dims, 2, &mut rng).unwrap();
        let x = DenseTensor::from_fn(dims.to_vec(), |_| rng.random::<f64>()).unwrap();
        let grads = mode_gradients(&x, &m).unwrap();
        let h = 1e-6;
        let objective = |mm: &KruskalModel| -0.5 * residual_sum_squares(&x, mm).unwrap();
        for n in 0..3 {
            for i in 0..dims[n] {
                for r in 0..2 {
                    let mut fp = m.clone().into_factors();
                    fp[n][(i, r)] += h;
                    let mut fm = m.clone().into_factors();
                    fm[n][(i, r)] -= h;
                    let fd = (objective(&KruskalModel::new(fp).unwrap())
                        - objective(&KruskalModel::new(fm).unwrap()))
                        / (2.0 * h);
                    let g = grads[n][(i, r)];
                    assert!((g - fd).abs() <= 1e-4 * g.abs().max(1.0), "{g} vs {fd}");
                }
            }
        }
    }

    #[test]
    fn slice_gradients_agree_with_full_block() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = KruskalModel::random_uniform(&[3, 2, 4], 2, &mut rng).unwrap();
        let x = DenseTensor::from_fn(vec![3, 2, 4], |_| rng.random::<f64>()).unwrap();
        let k = 2;
        let slice = x.last_mode_slice(k).unwrap();
        let gs = slice_gradients(&slice, k, m.factors()).unwrap();
        // the same slice embedded in a one-slice tensor with a 1-row temporal factor
        let mut f = m.clone().into_factors();
        f[2] = m.factor(2).rows(k, 1).into_owned();
        let block = DenseTensor::new(vec![3, 2, 1], slice.values().to_vec()).unwrap();
        let gb = mode_gradients(&block, &KruskalModel::new(f).unwrap()).unwrap();
        for n in 0..3 {
            assert_eq!(gs[n], gb[n]);
        }
        assert!(slice_gradients(&slice, 9, m.factors()).is_err());
    }
}
