use std::io::Write;

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FScore {
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
}

/// Precision, recall and their harmonic mean; any ratio with a zero
/// denominator is 0.
pub fn fscore(tp: u64, fp: u64, fn_: u64) -> FScore {
    let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let fscore = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    FScore { precision, recall, fscore }
}

/// Per-trial detection scores with their sample mean and standard deviation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub trials: Vec<FScore>,
}

impl EvalReport {
    pub fn mean(&self) -> FScore {
        FScore {
            precision: mean(self.trials.iter().map(|t| t.precision)),
            recall: mean(self.trials.iter().map(|t| t.recall)),
            fscore: mean(self.trials.iter().map(|t| t.fscore)),
        }
    }

    /// Sample standard deviation (`n - 1` denominator); 0 for a single trial.
    pub fn std(&self) -> FScore {
        FScore {
            precision: sample_std(self.trials.iter().map(|t| t.precision)),
            recall: sample_std(self.trials.iter().map(|t| t.recall)),
            fscore: sample_std(self.trials.iter().map(|t| t.fscore)),
        }
    }

    /// `trial,precision,recall,fscore`, one row per trial.
    pub fn write_trials_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["trial", "precision", "recall", "fscore"])?;
        for (i, t) in self.trials.iter().enumerate() {
            out.write_record(&[
                i.to_string(),
                t.precision.to_string(),
                t.recall.to_string(),
                t.fscore.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn summary_text(&self) -> String {
        let (m, s) = (self.mean(), self.std());
        format!(
            "trials = {}\nprecision = {} +- {}\nrecall = {} +- {}\nfscore = {} +- {}\n",
            self.trials.len(),
            m.precision,
            s.precision,
            m.recall,
            s.recall,
            m.fscore,
            s.fscore
        )
    }
}

fn mean(it: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = it.len();
    if n == 0 {
        return f64::NAN;
    }
    it.sum::<f64>() / n as f64
}

fn sample_std(it: impl ExactSizeIterator<Item = f64> + Clone) -> f64 {
    let n = it.len();
    if n < 2 {
        return 0.0;
    }
    let mu = mean(it.clone());
    (it.map(|v| (v - mu) * (v - mu)).sum::<f64>() / (n - 1) as f64).sqrt()
}
