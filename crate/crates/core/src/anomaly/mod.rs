//! One-class detection over temporal-factor rows, k-NN localization over
//! location-factor rows, and detection scoring.

mod eval;
mod knn;
mod one_class;

pub use eval::{fscore, EvalReport, FScore};
pub use knn::{localization_scores, DEFAULT_K};
pub use one_class::{fit_one_class, AnomalyModel, SIGMA_FLOOR};
