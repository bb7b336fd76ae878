use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Neighbour count used when none is configured.
pub const DEFAULT_K: usize = 2;

/// For each location-factor snapshot `B` (`L x R`), score every location by
/// the mean Euclidean distance from its row to its `k` nearest other rows.
/// Equal distances are resolved in favour of the lower row index.
///
/// Returns an `events x L` matrix.
pub fn localization_scores(history: &[Matrix], k: usize) -> Result<Matrix> {
    let Some(first) = history.first() else {
        return Ok(Matrix::zeros(0, 0));
    };
    let l = first.nrows();
    if k == 0 || k >= l {
        return Err(Error::input(format!("k must be in 1..={}, got {k}", l.saturating_sub(1))));
    }
    if let Some(b) = history.iter().find(|b| b.shape() != first.shape()) {
        return Err(Error::shape(format!(
            "snapshots differ in shape: {:?} vs {:?}",
            first.shape(),
            b.shape()
        )));
    }
    let mut out = Matrix::zeros(history.len(), l);
    let mut dist: Vec<(f64, usize)> = Vec::with_capacity(l);
    for (e, b) in history.iter().enumerate() {
        for i in 0..l {
            dist.clear();
            dist.extend((0..l).filter(|&j| j != i).map(|j| ((b.row(i) - b.row(j)).norm(), j)));
            dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            out[(e, i)] = dist[..k].iter().map(|d| d.0).sum::<f64>() / k as f64;
        }
    }
    Ok(out)
}
