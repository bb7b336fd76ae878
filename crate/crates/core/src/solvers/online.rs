use super::linalg::{hadamard_gram, solve_gram_right};
use super::state::{Sample, SolverState};
use super::step::necpd_step;
use super::SolverConfig;
use crate::error::{Error, Result};
use crate::tensor::{for_each_index, DenseTensor, Matrix};

/// Least-squares temporal coefficients of `slice` against the non-temporal
/// factors: `argmin_c || vec(slice) - KR c ||`, returned as a `1 x R` row.
pub fn least_squares_row(slice: &DenseTensor, nontemporal: &[Matrix]) -> Result<Matrix> {
    let expect: Vec<usize> = nontemporal.iter().map(|f| f.nrows()).collect();
    if slice.dims() != expect.as_slice() {
        return Err(Error::shape(format!(
            "slice dims {:?} do not match non-temporal factor rows {:?}",
            slice.dims(),
            expect
        )));
    }
    let rank = nontemporal[0].ncols();
    let mut rhs = Matrix::zeros(1, rank);
    let values = slice.values();
    for_each_index(slice.dims(), |idx, lin| {
        let x = values[lin];
        if x == 0.0 {
            return;
        }
        for r in 0..rank {
            let mut p = x;
            for (f, &i) in nontemporal.iter().zip(idx) {
                p *= f[(i, r)];
            }
            rhs[(0, r)] += p;
        }
    });
    let gram = hadamard_gram(nontemporal, usize::MAX);
    Ok(solve_gram_right(&gram, &rhs))
}

/// Absorb one new temporal slice.
///
/// Appends a temporal row initialized by [`least_squares_row`] (with a zero
/// velocity row), then performs exactly one [`necpd_step`] on the new slice.
/// Non-temporal factors, velocities and the step counter carry over.
pub fn online_update(state: SolverState, new_slice: &DenseTensor, cfg: &SolverConfig) -> Result<SolverState> {
    let SolverState {
        model,
        mut velocities,
        step,
        noise_rng,
    } = state;
    let tm = model.order() - 1;
    let mut factors = model.into_factors();
    let row = least_squares_row(new_slice, &factors[..tm])?;
    let k = factors[tm].nrows();
    let grown = std::mem::replace(&mut factors[tm], Matrix::zeros(0, 0)).insert_row(k, 0.0);
    factors[tm] = grown;
    factors[tm].row_mut(k).copy_from(&row);
    let v = std::mem::replace(&mut velocities[tm], Matrix::zeros(0, 0)).insert_row(k, 0.0);
    velocities[tm] = v;
    let state = SolverState {
        model: crate::tensor::KruskalModel::new(factors)?,
        velocities,
        step,
        noise_rng,
    };
    necpd_step(state, Sample::new(k, new_slice), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{reconstruct, KruskalModel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn shapes_grow_by_one_row() {
        let cfg = SolverConfig::new(2);
        let mut s = SolverState::for_stream(&[3, 4], &cfg).unwrap();
        let slice = DenseTensor::from_fn(vec![3, 4], |i| (i[0] * 4 + i[1]) as f64 * 0.1).unwrap();
        for n in 1..=3 {
            s = online_update(s, &slice, &cfg).unwrap();
            assert_eq!(s.model().dims(), vec![3, 4, n]);
            assert_eq!(s.velocities()[2].nrows(), n);
        }
        assert!(online_update(s, &DenseTensor::zeros(vec![4, 3]).unwrap(), &cfg).is_err());
    }

    #[test]
    fn reproducible_slice_gets_exact_coefficients() {
        let mut cfg = SolverConfig::new(2);
        cfg.noise_sigma = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let truth = KruskalModel::random_uniform(&[4, 5, 1], 2, &mut rng).unwrap();
        let x = reconstruct(&truth, &[4, 5, 1]).unwrap();
        let slice = x.last_mode_slice(0).unwrap_or_else(|_| unreachable!());
        let row = least_squares_row(&slice, &truth.factors()[..2]).unwrap();
        assert!((&row - truth.factor(2)).abs().max() < 1e-10);

        let start = KruskalModel::new(vec![
            truth.factor(0).clone(),
            truth.factor(1).clone(),
            Matrix::zeros(0, 2),
        ])
        .unwrap();
        let s = online_update(SolverState::from_model(start, &cfg), &slice, &cfg).unwrap();
        assert!((s.model().factor(2) - truth.factor(2)).abs().max() < 1e-9);
        assert!((s.model().factor(0) - truth.factor(0)).abs().max() < 1e-9);
    }
}
