use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Smallest bandwidth used when the median heuristic degenerates.
pub const SIGMA_FLOOR: f64 = 1e-8;

/// Gaussian kernel-mean scorer trained on healthy embeddings.
///
/// `score(z) = mean_i exp(-|z - row_i|^2 / (2 sigma^2))` and the decision
/// value is `score(z) - threshold`; negative means anomalous.
#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyModel {
    train_rows: Matrix,
    sigma: f64,
    nu: f64,
    threshold: f64,
    sigma_floored: bool,
}

/// Fit the scorer. `sigma = None` uses the median pairwise distance of the
/// training rows.
///
/// The threshold is placed so that exactly `ceil(nu * M)` training scores lie
/// strictly below it: halfway between the sorted scores on either side of
/// that cut.
pub fn fit_one_class(train_rows: &Matrix, nu: f64, sigma: Option<f64>) -> Result<AnomalyModel> {
    let m = train_rows.nrows();
    if m < 2 {
        return Err(Error::input(format!("need at least 2 training rows, got {m}")));
    }
    if !(nu > 0.0 && nu < 1.0) {
        return Err(Error::input(format!("nu must be in (0, 1), got {nu}")));
    }
    if train_rows.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("training rows contain non-finite values"));
    }
    let (sigma, sigma_floored) = match sigma {
        Some(s) if s > 0.0 && s.is_finite() => (s, false),
        Some(s) => return Err(Error::input(format!("sigma must be positive, got {s}"))),
        None => {
            let med = median_pairwise_distance(train_rows);
            if med > SIGMA_FLOOR {
                (med, false)
            } else {
                (SIGMA_FLOOR, true)
            }
        }
    };
    let mut model = AnomalyModel {
        train_rows: train_rows.clone(),
        sigma,
        nu,
        threshold: 0.0,
        sigma_floored,
    };
    let mut scores: Vec<f64> = (0..m).map(|i| model.score_row(train_rows.row(i).iter())).collect();
    scores.sort_by(f64::total_cmp);
    let below = ((nu * m as f64).ceil() as usize).min(m);
    model.threshold = if below == m {
        scores[m - 1] + (scores[m - 1] - scores[m - 2]).abs().max(f64::EPSILON)
    } else {
        0.5 * (scores[below - 1] + scores[below])
    };
    Ok(model)
}

fn median_pairwise_distance(rows: &Matrix) -> f64 {
    let m = rows.nrows();
    let mut d = Vec::with_capacity(m * (m - 1) / 2);
    for i in 0..m {
        for j in i + 1..m {
            d.push((rows.row(i) - rows.row(j)).norm());
        }
    }
    d.sort_by(f64::total_cmp);
    let n = d.len();
    if n % 2 == 1 {
        d[n / 2]
    } else {
        0.5 * (d[n / 2 - 1] + d[n / 2])
    }
}

impl AnomalyModel {
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn train_rows(&self) -> &Matrix {
        &self.train_rows
    }

    /// The median heuristic collapsed and the bandwidth was floored.
    pub fn sigma_floored(&self) -> bool {
        self.sigma_floored
    }

    fn score_row<'a>(&self, z: impl Iterator<Item = &'a f64> + Clone) -> f64 {
        let denom = 2.0 * self.sigma * self.sigma;
        let total: f64 = (0..self.train_rows.nrows())
            .map(|i| {
                let d2: f64 = self
                    .train_rows
                    .row(i)
                    .iter()
                    .zip(z.clone())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                (-d2 / denom).exp()
            })
            .sum();
        total / self.train_rows.nrows() as f64
    }

    /// Kernel-mean score of every row of `rows`.
    pub fn scores(&self, rows: &Matrix) -> Result<Vec<f64>> {
        if rows.nrows() > 0 && rows.ncols() != self.train_rows.ncols() {
            return Err(Error::shape(format!(
                "rows have {} columns, model was trained on {}",
                rows.ncols(),
                self.train_rows.ncols()
            )));
        }
        Ok((0..rows.nrows()).map(|i| self.score_row(rows.row(i).iter())).collect())
    }

    /// `score - threshold` per row; more negative is more anomalous.
    pub fn decision_values(&self, rows: &Matrix) -> Result<Vec<f64>> {
        Ok(self.scores(rows)?.into_iter().map(|s| s - self.threshold).collect())
    }
}
