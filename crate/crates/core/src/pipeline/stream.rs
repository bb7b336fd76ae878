use super::{extract_features, feature_tensor, EventRecord, PipelineConfig};
use crate::anomaly::{fit_one_class, localization_scores, AnomalyModel};
use crate::diagnostics::ConvergenceTrace;
use crate::error::{Error, Result};
use crate::exec::Parallelism;
use crate::solvers::{fit_method, least_squares_row, online_update, Method, SliceOrder};
use crate::tensor::{DenseTensor, KruskalModel, Matrix};

/// Location mode of a `feature x location x event` tensor.
pub const LOCATION_MODE: usize = 1;

/// Everything a stream run produces.
#[derive(Debug, Clone)]
pub struct StreamOutput {
    /// Trace of the initial fit on the training window.
    pub trace: ConvergenceTrace,
    pub rank: usize,
    /// Scalar all features were divided by: the RMS of the training tensor.
    pub feature_scale: f64,
    pub detector: AnomalyModel,
    /// One per streamed event; negative flags damage.
    pub decision_values: Vec<f64>,
    /// `streamed events x locations`.
    pub localization: Matrix,
    pub model: KruskalModel,
}

/// Feature matrices for a batch of events, computed in parallel.
pub fn event_features(cfg: &PipelineConfig, events: &[EventRecord], par: Parallelism) -> Result<Vec<Matrix>> {
    par.map(events.len(), |i| {
        extract_features(&events[i], cfg.n_freq, cfg.diff_adjacent)
            .map(|f| f.matrix)
            .map_err(|e| e.at_event(i))
    })
    .into_iter()
    .collect()
}

/// Fit on `train`, then push every event of `stream` through one online
/// update, scoring each as it arrives.
pub fn run_stream(cfg: &PipelineConfig, train: &[EventRecord], stream: &[EventRecord]) -> Result<StreamOutput> {
    let par = Parallelism::default();
    let train = event_features(cfg, train, par)?;
    let stream = event_features(cfg, stream, par)?;
    run_stream_features(cfg, &train, &stream)
}

/// [`run_stream`] on precomputed feature matrices.
///
/// The detector is trained on the least-squares temporal rows of the
/// training slices against the fitted location and feature factors, so
/// training and streamed embeddings are computed the same way.
pub fn run_stream_features(cfg: &PipelineConfig, train: &[Matrix], stream: &[Matrix]) -> Result<StreamOutput> {
    cfg.validate()?;
    if train.len() < 2 {
        return Err(Error::input(format!("need at least 2 training events, got {}", train.len())));
    }
    let method: Method = cfg.method.parse()?;
    let x = feature_tensor(train)?;
    let rms = x.frobenius_norm() / (x.len() as f64).sqrt();
    let feature_scale = if rms > 0.0 { rms } else { 1.0 };
    let x = DenseTensor::new(x.dims().to_vec(), x.values().iter().map(|v| v / feature_scale).collect())?;
    let solver = cfg.solver(cfg.resolve_rank(&x, Parallelism::Sequential)?);
    let (mut state, trace) = fit_method(&x, &solver, method, SliceOrder::Shuffled)?;

    let nontemporal = &state.model().factors()[..2];
    let mut emb = Matrix::zeros(train.len(), solver.rank);
    for (i, f) in train.iter().enumerate() {
        let slice = DenseTensor::from_matrix(&(f / feature_scale))?;
        emb.set_row(i, &least_squares_row(&slice, nontemporal)?.row(0));
    }
    let detector = fit_one_class(&emb, cfg.nu, cfg.sigma)?;

    let mut decision_values = Vec::with_capacity(stream.len());
    let mut snapshots = Vec::with_capacity(stream.len());
    for (i, f) in stream.iter().enumerate() {
        let slice = DenseTensor::from_matrix(&(f / feature_scale)).map_err(|e| e.at_event(i))?;
        state = online_update(state, &slice, &solver).map_err(|e| e.at_event(i))?;
        let c = state.model().factor(2);
        let row = c.rows(c.nrows() - 1, 1).into_owned();
        decision_values.push(detector.decision_values(&row).map_err(|e| e.at_event(i))?[0]);
        snapshots.push(state.model().factor(LOCATION_MODE).clone());
    }
    let localization = if snapshots.is_empty() {
        Matrix::zeros(0, train[0].ncols())
    } else {
        localization_scores(&snapshots, cfg.k)?
    };
    Ok(StreamOutput {
        trace,
        rank: solver.rank,
        feature_scale,
        detector,
        decision_values,
        localization,
        model: state.into_model(),
    })
}
