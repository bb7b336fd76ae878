use nalgebra::SymmetricEigen;

use crate::tensor::Matrix;

const SINGULAR_RCOND: f64 = 1e-12;
const RIDGE: f64 = 1e-10;

/// Hadamard product of `F_m^T F_m` over every mode except `skip`.
pub(crate) fn hadamard_gram(factors: &[Matrix], skip: usize) -> Matrix {
    let rank = factors[0].ncols();
    let mut g = Matrix::from_element(rank, rank, 1.0);
    for (m, f) in factors.iter().enumerate() {
        if m != skip {
            g.component_mul_assign(&(f.transpose() * f));
        }
    }
    g
}

/// Solve `X * gram = rhs` for symmetric positive semi-definite `gram`.
///
/// A ridge `1e-10 * max(1, lambda_max) * I` is added when `gram` is singular
/// to within `1e-12` relative conditioning.
pub(crate) fn solve_gram_right(gram: &Matrix, rhs: &Matrix) -> Matrix {
    let eig = SymmetricEigen::new(gram.clone());
    let lmax = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let lmin = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let mut g = gram.clone();
    if !(lmin > SINGULAR_RCOND * lmax) {
        let ridge = RIDGE * lmax.max(1.0);
        for i in 0..g.nrows() {
            g[(i, i)] += ridge;
        }
    }
    let rhs_t = rhs.transpose();
    match g.clone().cholesky() {
        Some(ch) => ch.solve(&rhs_t).transpose(),
        // only reachable for indefinite input; fall back to the pseudo-inverse
        None => {
            let n = g.nrows();
            let pinv = g
                .pseudo_inverse(SINGULAR_RCOND * lmax.max(1.0))
                .unwrap_or_else(|_| Matrix::zeros(n, n));
            (pinv * rhs_t).transpose()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_well_conditioned_system() {
        let g = Matrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let x_true = Matrix::from_row_slice(3, 2, &[1.0, 2.0, -1.0, 0.5, 0.0, 3.0]);
        let rhs = &x_true * &g;
        let x = solve_gram_right(&g, &rhs);
        assert!((x - x_true).abs().max() < 1e-12);
    }

    #[test]
    fn singular_gram_does_not_blow_up() {
        let g = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let rhs = Matrix::from_row_slice(1, 2, &[2.0, 2.0]);
        let x = solve_gram_right(&g, &rhs);
        assert!(x.iter().all(|v| v.is_finite()));
        assert!((&x * &g - rhs).abs().max() < 1e-6);
    }
}
