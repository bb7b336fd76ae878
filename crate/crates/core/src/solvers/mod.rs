//! CP solvers: batch ALS, plain and perturbed SGD, the momentum solver and
//! the single-slice online update.
//!
//! Stochastic solvers treat the last mode as temporal: one sample is one
//! slice along that mode, touching every non-temporal factor and a single
//! temporal row.

mod als;
mod config;
mod fit;
mod gradient;
mod linalg;
mod online;
mod state;
mod step;

pub use als::{als_best_of, als_fit, als_fit_from};
pub use config::{Method, NoiseScaling, SliceOrder, SolverConfig};
pub use fit::{fit_from_state, fit_method, necpd_fit, sgd_fit};
pub use gradient::mode_gradients;
pub use online::{least_squares_row, online_update};
pub use state::{NoiseRng, Sample, SolverState};
pub use step::{necpd_step, perturbation, sgd_step, velocity_update};
