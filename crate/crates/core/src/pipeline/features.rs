use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::EventRecord;
use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, Matrix};

/// Standard deviation floor applied to constant signals.
pub const STD_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    /// `n_freq x locations`; column `l` holds the spectrum of location `l`.
    pub matrix: Matrix,
    /// Sensors (or sensor pairs) whose standard deviation hit [`STD_FLOOR`].
    pub constant_channels: Vec<usize>,
}

/// Frequency-domain features of one event.
///
/// Each channel is standardized to zero mean and unit standard deviation,
/// transformed with a real FFT, and the magnitudes of bins `1..=n_freq` are
/// kept (the DC bin is dropped). With `diff_adjacent` the channels are the
/// differences of sensor pairs `(0, 1), (2, 3), ...` taken before
/// standardization, halving the location count.
pub fn extract_features(e: &EventRecord, n_freq: usize, diff_adjacent: bool) -> Result<Features> {
    if n_freq == 0 {
        return Err(Error::input("n_freq must be positive"));
    }
    let n = e.samples();
    if n < 2 * n_freq {
        return Err(Error::input(format!(
            "event {}: {} samples cannot supply {} frequency bins",
            e.id, n, n_freq
        )));
    }
    let channels: Vec<Vec<f64>> = if diff_adjacent {
        if !e.sensors().is_multiple_of(2) || e.sensors() < 2 {
            return Err(Error::input(format!(
                "event {}: adjacent differencing needs an even sensor count, got {}",
                e.id,
                e.sensors()
            )));
        }
        e.signals
            .chunks(2)
            .map(|p| p[0].iter().zip(&p[1]).map(|(a, b)| a - b).collect())
            .collect()
    } else {
        e.signals.clone()
    };
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let mut matrix = Matrix::zeros(n_freq, channels.len());
    let mut constant_channels = Vec::new();
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    for (c, sig) in channels.iter().enumerate() {
        let mean = sig.iter().sum::<f64>() / n as f64;
        let var = sig.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let mut std = var.sqrt();
        if !(std > STD_FLOOR) {
            std = STD_FLOOR;
            constant_channels.push(c);
        }
        for (b, v) in buf.iter_mut().zip(sig) {
            *b = Complex::new((v - mean) / std, 0.0);
        }
        fft.process(&mut buf);
        for f in 0..n_freq {
            matrix[(f, c)] = buf[f + 1].norm();
        }
    }
    Ok(Features { matrix, constant_channels })
}

/// Stack per-event feature matrices into a `feature x location x event`
/// tensor.
pub fn feature_tensor(features: &[Matrix]) -> Result<DenseTensor> {
    let slices = features
        .iter()
        .map(DenseTensor::from_matrix)
        .collect::<Result<Vec<_>>>()?;
    DenseTensor::stack_last_mode(&slices)
}
