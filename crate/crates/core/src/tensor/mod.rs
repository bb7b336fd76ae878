//! Dense N-way tensors, matricization, Khatri-Rao products and Kruskal
//! (CP) models.
//!
//! Storage is row-major (last index fastest). Unfoldings follow the Kolda
//! layout: in the mode-`n` unfolding the column index runs fastest over the
//! lowest non-`n` mode, so that `unfold(reconstruct(m), n)` equals
//! `A_n * khatri_rao_except(m, n)^T`.

mod io;
mod kruskal;

pub use io::{read_matrix_csv, read_tensor, write_matrix_csv, write_tensor, TENSOR_MAGIC};
pub use kruskal::{
    khatri_rao, khatri_rao_except, reconstruct, reconstruct_with, residual_metrics,
    residual_sum_squares, KruskalModel, ResidualMetrics,
};
pub(crate) use kruskal::metrics_from_rss;

use crate::error::{Error, Result};

/// Column-major dense matrix used for factors, unfoldings and gradients.
pub type Matrix = nalgebra::DMatrix<f64>;

/// Order-N dense tensor of `f64` in row-major layout.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    values: Vec<f64>,
}

impl DenseTensor {
    pub fn new(dims: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        check_dims(&dims)?;
        let n: usize = dims.iter().product();
        if values.len() != n {
            return Err(Error::shape(format!(
                "{} values for dims {:?} (expected {})",
                values.len(),
                dims,
                n
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!("non-finite value at offset {pos}")));
        }
        Ok(Self { dims, values })
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        check_dims(&dims)?;
        let n = dims.iter().product();
        Ok(Self {
            dims,
            values: vec![0.0; n],
        })
    }

    /// Build a tensor by evaluating `f` at every multi-index in storage order.
    pub fn from_fn(dims: Vec<usize>, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        check_dims(&dims)?;
        let mut values = Vec::with_capacity(dims.iter().product());
        for_each_index(&dims, |idx, _| values.push(f(idx)));
        Self::new(dims, values)
    }

    /// Order-2 tensor holding the matrix `m` row by row.
    pub fn from_matrix(m: &Matrix) -> Result<Self> {
        let mut values = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                values.push(m[(i, j)]);
            }
        }
        Self::new(vec![m.nrows(), m.ncols()], values)
    }

    /// Inverse of [`DenseTensor::from_matrix`] for order-2 tensors.
    pub fn to_matrix(&self) -> Result<Matrix> {
        if self.order() != 2 {
            return Err(Error::shape(format!(
                "expected an order-2 tensor, got dims {:?}",
                self.dims
            )));
        }
        Ok(Matrix::from_row_slice(self.dims[0], self.dims[1], &self.values))
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        idx.iter()
            .zip(&self.dims)
            .fold(0, |acc, (&i, &d)| acc * d + i)
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.values[self.offset(idx)]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// The sub-tensor at index `k` of the last mode, of order `N - 1`.
    ///
    /// Requires `N >= 3` so that the slice is itself a valid tensor.
    pub fn last_mode_slice(&self, k: usize) -> Result<DenseTensor> {
        let n = self.order();
        if n < 3 {
            return Err(Error::shape("last-mode slices need a tensor of order >= 3"));
        }
        let last = self.dims[n - 1];
        if k >= last {
            return Err(Error::shape(format!("slice {k} out of range 0..{last}")));
        }
        let dims = self.dims[..n - 1].to_vec();
        let values = self.values.iter().skip(k).step_by(last).copied().collect();
        Ok(DenseTensor { dims, values })
    }

    /// Stack order-(N-1) slices of equal shape along a new last mode.
    pub fn stack_last_mode(slices: &[DenseTensor]) -> Result<DenseTensor> {
        let first = slices
            .first()
            .ok_or_else(|| Error::input("cannot stack zero slices"))?;
        let k = slices.len();
        if let Some(bad) = slices.iter().find(|s| s.dims != first.dims) {
            return Err(Error::shape(format!(
                "slice dims {:?} differ from {:?}",
                bad.dims, first.dims
            )));
        }
        let mut values = vec![0.0; first.len() * k];
        for (j, s) in slices.iter().enumerate() {
            for (i, v) in s.values.iter().enumerate() {
                values[i * k + j] = *v;
            }
        }
        let mut dims = first.dims.clone();
        dims.push(k);
        DenseTensor::new(dims, values)
    }

    pub(crate) fn from_parts_unchecked(dims: Vec<usize>, values: Vec<f64>) -> Self {
        debug_assert_eq!(dims.iter().product::<usize>(), values.len());
        Self { dims, values }
    }
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::shape(format!(
            "tensor order must be >= 2, got {}",
            dims.len()
        )));
    }
    if dims.contains(&0) {
        return Err(Error::shape(format!("zero extent in dims {dims:?}")));
    }
    Ok(())
}

/// Visit every multi-index of `dims` in row-major order with its linear offset.
pub(crate) fn for_each_index(dims: &[usize], mut f: impl FnMut(&[usize], usize)) {
    let total: usize = dims.iter().product();
    if total == 0 {
        return;
    }
    let mut idx = vec![0usize; dims.len()];
    for lin in 0..total {
        f(&idx, lin);
        for d in (0..dims.len()).rev() {
            idx[d] += 1;
            if idx[d] < dims[d] {
                break;
            }
            idx[d] = 0;
        }
    }
}

/// Column strides of the mode-`mode` unfolding: `J_n = prod_{m<n, m!=mode} I_m`.
fn unfolding_strides(dims: &[usize], mode: usize) -> Vec<usize> {
    let mut strides = vec![0; dims.len()];
    let mut acc = 1;
    for (n, &d) in dims.iter().enumerate() {
        if n != mode {
            strides[n] = acc;
            acc *= d;
        }
    }
    strides
}

/// Mode-`mode` matricization (0-based mode).
///
/// Returns an `I_mode x prod_{n!=mode} I_n` matrix.
pub fn unfold(t: &DenseTensor, mode: usize) -> Result<Matrix> {
    if mode >= t.order() {
        return Err(Error::InvalidMode {
            mode,
            order: t.order(),
        });
    }
    let rows = t.dims[mode];
    let cols = t.len() / rows;
    let strides = unfolding_strides(&t.dims, mode);
    let mut out = Matrix::zeros(rows, cols);
    for_each_index(&t.dims, |idx, lin| {
        let col: usize = idx.iter().zip(&strides).map(|(i, s)| i * s).sum();
        out[(idx[mode], col)] = t.values[lin];
    });
    Ok(out)
}

/// Inverse of [`unfold`]: rebuild a tensor of shape `dims` from its
/// mode-`mode` unfolding.
pub fn fold(m: &Matrix, mode: usize, dims: &[usize]) -> Result<DenseTensor> {
    check_dims(dims)?;
    if mode >= dims.len() {
        return Err(Error::InvalidMode {
            mode,
            order: dims.len(),
        });
    }
    let total: usize = dims.iter().product();
    if m.len() != total || m.nrows() != dims[mode] {
        return Err(Error::shape(format!(
            "{}x{} matrix cannot fold into dims {:?} along mode {}",
            m.nrows(),
            m.ncols(),
            dims,
            mode
        )));
    }
    let strides = unfolding_strides(dims, mode);
    let mut values = vec![0.0; total];
    for_each_index(dims, |idx, lin| {
        let col: usize = idx.iter().zip(&strides).map(|(i, s)| i * s).sum();
        values[lin] = m[(idx[mode], col)];
    });
    DenseTensor::new(dims.to_vec(), values)
}

/// n-mode product `t x_mode m`: replaces extent `I_mode` with `m.nrows()`.
pub fn mode_product(t: &DenseTensor, m: &Matrix, mode: usize) -> Result<DenseTensor> {
    let unfolded = unfold(t, mode)?;
    if m.ncols() != unfolded.nrows() {
        return Err(Error::shape(format!(
            "mode-{mode} product needs {} columns, matrix has {}",
            unfolded.nrows(),
            m.ncols()
        )));
    }
    let mut dims = t.dims.clone();
    dims[mode] = m.nrows();
    fold(&(m * unfolded), mode, &dims)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn iota(dims: Vec<usize>) -> DenseTensor {
        let n: usize = dims.iter().product();
        DenseTensor::new(dims, (1..=n).map(|v| v as f64).collect()).unwrap()
    }

    #[test]
    fn rejects_bad_construction() {
        assert!(DenseTensor::new(vec![3], vec![0.0; 3]).is_err());
        assert!(DenseTensor::new(vec![2, 2], vec![0.0; 3]).is_err());
        assert!(DenseTensor::new(vec![2, 0], vec![]).is_err());
        assert!(DenseTensor::new(vec![1, 2], vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn order_two_mode_zero_unfold_is_the_matrix() {
        let t = iota(vec![3, 4]);
        let m = unfold(&t, 0).unwrap();
        assert_eq!(m, t.to_matrix().unwrap());
    }

    #[test]
    fn unfold_2x2x2_matches_index_map() {
        let t = iota(vec![2, 2, 2]);
        let m = unfold(&t, 0).unwrap();
        // oracle: column j = i2 + i3 * I2 over x_{ijk} = 1 + 4i + 2j + k
        let mut oracle = Matrix::zeros(2, 4);
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    oracle[(i, j + 2 * k)] = (1 + 4 * i + 2 * j + k) as f64;
                }
            }
        }
        assert_eq!(m, oracle);
        assert_eq!(m.row(0).iter().copied().collect::<Vec<_>>(), [1.0, 3.0, 2.0, 4.0]);
        assert_eq!(m.row(1).iter().copied().collect::<Vec<_>>(), [5.0, 7.0, 6.0, 8.0]);
    }

    #[test]
    fn unfold_invalid_mode() {
        let t = iota(vec![2, 3, 4]);
        assert!(matches!(
            unfold(&t, 3),
            Err(Error::InvalidMode { mode: 3, order: 3 })
        ));
    }

    #[test]
    fn fold_single_row() {
        let m = Matrix::from_row_slice(1, 4, &[1.0, 2.0, 3.0, 4.0]);
        let t = fold(&m, 0, &[1, 4]).unwrap();
        assert_eq!(t.dims(), &[1, 4]);
        assert_eq!(t.values(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn fold_rejects_wrong_element_count() {
        let m = Matrix::zeros(3, 4);
        assert!(matches!(
            fold(&m, 0, &[3, 5]),
            Err(Error::InvalidShape(_))
        ));
    }

    #[test]
    fn fold_unfold_round_trip_3x4x5() {
        let t = DenseTensor::from_fn(vec![3, 4, 5], |i| {
            (i[0] as f64 * 1.7 - i[1] as f64 * 0.3 + (i[2] as f64).sin()).cos()
        })
        .unwrap();
        for mode in 0..3 {
            let back = fold(&unfold(&t, mode).unwrap(), mode, t.dims()).unwrap();
            assert_eq!(back, t);
        }
    }

    #[test]
    fn slices_and_stack_are_inverse() {
        let t = iota(vec![2, 3, 4]);
        let slices: Vec<_> = (0..4).map(|k| t.last_mode_slice(k).unwrap()).collect();
        assert_eq!(slices[1].get(&[1, 2]), t.get(&[1, 2, 1]));
        assert_eq!(DenseTensor::stack_last_mode(&slices).unwrap(), t);
    }

    #[test]
    fn mode_product_matches_definition() {
        let t = iota(vec![2, 3, 2]);
        let m = Matrix::from_row_slice(2, 3, &[1.0, 0.0, 2.0, -1.0, 1.0, 0.5]);
        let p = mode_product(&t, &m, 1).unwrap();
        assert_eq!(p.dims(), &[2, 2, 2]);
        for i in 0..2 {
            for a in 0..2 {
                for k in 0..2 {
                    let want: f64 = (0..3).map(|j| m[(a, j)] * t.get(&[i, j, k])).sum();
                    assert!((p.get(&[i, a, k]) - want).abs() < 1e-12);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn fold_unfold_identity(dims in prop::collection::vec(1usize..5, 2..5), seed in any::<u64>()) {
            let mut s = seed;
            let t = DenseTensor::from_fn(dims.clone(), |_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            }).unwrap();
            for mode in 0..dims.len() {
                let back = fold(&unfold(&t, mode).unwrap(), mode, &dims).unwrap();
                prop_assert_eq!(&back, &t);
            }
        }
    }
}
