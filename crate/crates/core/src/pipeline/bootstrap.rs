use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{event_features, run_stream_features, EventRecord, Label, PipelineConfig};
use crate::anomaly::{fscore, EvalReport, FScore};
use crate::error::{Error, Result};
use crate::exec::{split_seed, Parallelism};

/// Minimum healthy events for a bootstrap evaluation.
pub const MIN_HEALTHY: usize = 10;

/// Detailed outcome of one bootstrap trial.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub seed: u64,
    /// Indexes of the healthy events used for training, in training order.
    pub train: Vec<usize>,
    /// Test event indexes with their decision values.
    pub test: Vec<(usize, f64)>,
    pub score: FScore,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapResult {
    pub report: EvalReport,
    pub trials: Vec<Trial>,
}

impl BootstrapResult {
    /// Mean decision value per label over every test event of every trial,
    /// sorted by label.
    pub fn mean_decision_by_label(&self, events: &[EventRecord]) -> Vec<(Label, f64)> {
        let mut acc: std::collections::BTreeMap<Label, (f64, usize)> = Default::default();
        for t in &self.trials {
            for &(i, v) in &t.test {
                let e = acc.entry(events[i].label.clone()).or_default();
                e.0 += v;
                e.1 += 1;
            }
        }
        acc.into_iter().map(|(l, (s, n))| (l, s / n as f64)).collect()
    }
}

/// Repeated random healthy splits: train on `bootstrap_fraction` of the
/// healthy events, test on the remaining healthy events plus every damage
/// event. Damage is the positive class. Trials run in parallel, each with
/// seed `split_seed(cfg.seed, trial)`.
pub fn evaluate_bootstrap(cfg: &PipelineConfig, events: &[EventRecord], par: Parallelism) -> Result<BootstrapResult> {
    cfg.validate()?;
    let healthy: Vec<usize> = (0..events.len()).filter(|&i| !events[i].label.is_damage()).collect();
    if healthy.len() < MIN_HEALTHY {
        return Err(Error::input(format!(
            "bootstrap needs at least {MIN_HEALTHY} healthy events, got {}",
            healthy.len()
        )));
    }
    let damage: Vec<usize> = (0..events.len()).filter(|&i| events[i].label.is_damage()).collect();
    let n_train = ((cfg.bootstrap_fraction * healthy.len() as f64).round() as usize).clamp(2, healthy.len() - 1);
    let features = event_features(cfg, events, par)?;
    let trials = par
        .map(cfg.trials, |trial| {
            let seed = split_seed(cfg.seed, trial as u64);
            let mut order = healthy.clone();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let train = order[..n_train].to_vec();
            let mut test: Vec<usize> = order[n_train..].to_vec();
            test.sort_unstable();
            test.extend(&damage);
            let mut tcfg = cfg.clone();
            tcfg.seed = seed;
            let pick = |idx: &[usize]| idx.iter().map(|&i| features[i].clone()).collect::<Vec<_>>();
            let out = run_stream_features(&tcfg, &pick(&train), &pick(&test))?;
            let (mut tp, mut fp, mut fn_) = (0, 0, 0);
            for (&i, &v) in test.iter().zip(&out.decision_values) {
                match (events[i].label.is_damage(), v < 0.0) {
                    (true, true) => tp += 1,
                    (false, true) => fp += 1,
                    (true, false) => fn_ += 1,
                    (false, false) => {}
                }
            }
            Ok(Trial {
                seed,
                train,
                test: test.into_iter().zip(out.decision_values).collect(),
                score: fscore(tp, fp, fn_),
            })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(BootstrapResult {
        report: EvalReport {
            trials: trials.iter().map(|t| t.score).collect(),
        },
        trials,
    })
}
