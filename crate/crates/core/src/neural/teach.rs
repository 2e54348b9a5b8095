//! Training sets from the teacher planner and the teach / test / decide loop.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::encode::{encode_feature, encode_toolpath, Encoding};
use super::network::{HyperParams, Network, Pair};
use super::NeuralError;
use crate::part_model::PartModel;
use crate::planner::{plan_operation, requested_operations, Criteria, PlanSettings};
use crate::recognition::{FeatureModel, OperationClass};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    pub class: OperationClass,
    pub pairs: Vec<Pair>,
    /// Part id (or corpus index) of every pair.
    pub part_ids: Vec<String>,
}

/// Plans every part with the teacher and keeps the (feature, toolpath)
/// encodings of the requested class.
pub fn build_training_set(
    corpus: &[PartModel],
    class: OperationClass,
    settings: &PlanSettings,
    criteria: Criteria,
    enc: &Encoding,
) -> Result<TrainingSet, NeuralError> {
    let mut ts = TrainingSet {
        class,
        pairs: Vec::new(),
        part_ids: Vec::new(),
    };
    for (i, part) in corpus.iter().enumerate() {
        let fm = FeatureModel::from_part(part)?;
        let material = part
            .material()
            .ok_or_else(|| NeuralError::Corpus(format!("part {i}: stock material not defined")))?;
        for (f, c) in requested_operations(&fm, settings) {
            if c != class {
                continue;
            }
            let op = plan_operation(c, f, &fm.stock, &part.tools, material, criteria, settings)?;
            let x = encode_feature(f, &op.tool, &fm.stock, enc)?;
            let y = encode_toolpath(&op.toolpath, &op.params, &fm.stock, enc)?;
            ts.pairs.push((x, y));
            ts.part_ids.push(part.id.clone().unwrap_or_else(|| format!("#{i}")));
        }
    }
    Ok(ts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Metrics {
    pub mean_err: f64,
    pub max_err: f64,
}

/// Mean Euclidean distance between predicted and target coordinate triples
/// per pair (normalized units), then mean and max over pairs.
pub fn evaluate(net: &Network, test: &[Pair], k: usize) -> Result<Metrics, NeuralError> {
    let mut sum = 0.0;
    let mut max: f64 = 0.0;
    for (x, t) in test {
        let y = net.forward(x)?;
        let e = triple_error(&y, t, k);
        sum += e;
        max = max.max(e);
    }
    Ok(Metrics {
        mean_err: if test.is_empty() { 0.0 } else { sum / test.len() as f64 },
        max_err: max,
    })
}

pub fn triple_error(y: &[f64], t: &[f64], k: usize) -> f64 {
    let total: f64 = y[..3 * k]
        .chunks_exact(3)
        .zip(t[..3 * k].chunks_exact(3))
        .map(|(a, b)| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt())
        .sum();
    total / k as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    pub mean: f64,
    pub max: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { mean: 0.01, max: 0.03 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Success,
    Repeat,
}

pub fn decide_teaching(m: &Metrics, thr: &Thresholds) -> Decision {
    if m.mean_err <= thr.mean && m.max_err <= thr.max {
        Decision::Success
    } else {
        Decision::Repeat
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Success,
    Failure,
}

/// Training-loss samples kept in a report: one every this many epochs.
pub const LOSS_SAMPLE_EVERY: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct TeachReport {
    pub class: OperationClass,
    pub rounds: usize,
    pub epochs_per_round: Vec<usize>,
    /// Training loss every `LOSS_SAMPLE_EVERY` epochs, plus the final value.
    pub train_loss: Vec<f64>,
    pub train_metrics: Vec<Metrics>,
    pub test_metrics: Vec<Metrics>,
    pub train_pairs: usize,
    pub test_pairs: usize,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TeachConfig {
    pub hyper: HyperParams,
    pub thresholds: Thresholds,
    pub max_rounds: usize,
    /// Share of pairs held out for testing.
    pub test_fraction: f64,
}

impl Default for TeachConfig {
    fn default() -> Self {
        Self {
            hyper: HyperParams::default(),
            thresholds: Thresholds::default(),
            max_rounds: 5,
            test_fraction: 0.2,
        }
    }
}

/// Minimum number of pairs a class needs before teaching starts.
pub const MIN_PAIRS: usize = 5;

/// Seeded split into (train, test).
pub fn split_pairs(pairs: &[Pair], test_fraction: f64, seed: u64) -> (Vec<Pair>, Vec<Pair>) {
    let mut idx: Vec<usize> = (0..pairs.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = ((pairs.len() as f64 * test_fraction).round() as usize).clamp(1, pairs.len() - 1);
    let test = idx[..n_test].iter().map(|&i| pairs[i].clone()).collect();
    let train = idx[n_test..].iter().map(|&i| pairs[i].clone()).collect();
    (train, test)
}

/// Teaches one class: train, test on the held-out share, and repeat with
/// doubled epochs until the thresholds are met or the rounds run out.
pub fn teach_set(ts: &TrainingSet, cfg: &TeachConfig, enc: &Encoding) -> Result<(Network, TeachReport), NeuralError> {
    if ts.pairs.len() < MIN_PAIRS {
        return Err(NeuralError::InsufficientCorpus {
            class: ts.class,
            pairs: ts.pairs.len(),
        });
    }
    let hp = &cfg.hyper;
    let seed = hp.seed.wrapping_mul(1000).wrapping_add(ts.class.ordinal() as u64);
    let (train, test) = split_pairs(&ts.pairs, cfg.test_fraction, seed);
    let mut net = Network::random(
        enc.input_dim(),
        hp.hidden_dim,
        enc.output_dim(),
        hp.init_range,
        seed.wrapping_add(1),
    );
    let mut report = TeachReport {
        class: ts.class,
        rounds: 0,
        epochs_per_round: Vec::new(),
        train_loss: Vec::new(),
        train_metrics: Vec::new(),
        test_metrics: Vec::new(),
        train_pairs: train.len(),
        test_pairs: test.len(),
        verdict: Verdict::Failure,
    };
    let mut done = 0usize;
    for round in 0..cfg.max_rounds {
        let epochs = hp.epochs << round;
        let curve = net.train_epochs(&train, epochs, hp.learning_rate, done)?;
        for (i, l) in curve.iter().enumerate() {
            if (done + i) % LOSS_SAMPLE_EVERY == 0 {
                report.train_loss.push(*l);
            }
        }
        done += epochs;
        report.rounds = round + 1;
        report.epochs_per_round.push(epochs);
        report.train_metrics.push(evaluate(&net, &train, enc.k)?);
        let m = evaluate(&net, &test, enc.k)?;
        report.test_metrics.push(m);
        if decide_teaching(&m, &cfg.thresholds) == Decision::Success {
            report.verdict = Verdict::Success;
            report.train_loss.push(net.loss(&train)?);
            return Ok((net, report));
        }
    }
    report.train_loss.push(net.loss(&train)?);
    Err(NeuralError::TeachingFailed(Box::new(report)))
}

pub fn teach_loop(
    corpus: &[PartModel],
    class: OperationClass,
    cfg: &TeachConfig,
    settings: &PlanSettings,
    criteria: Criteria,
    enc: &Encoding,
) -> Result<(Network, TeachReport), NeuralError> {
    let ts = build_training_set(corpus, class, settings, criteria, enc)?;
    teach_set(&ts, cfg, enc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decisions() {
        let thr = Thresholds::default();
        let m = |a, b| Metrics { mean_err: a, max_err: b };
        assert_eq!(decide_teaching(&m(0.005, 0.02), &thr), Decision::Success);
        assert_eq!(decide_teaching(&m(0.005, 0.05), &thr), Decision::Repeat);
        assert_eq!(decide_teaching(&m(0.011, 0.02), &thr), Decision::Repeat);
    }

    fn toy_set(n: usize) -> TrainingSet {
        let enc = Encoding::default();
        let pairs = (0..n)
            .map(|i| {
                let a = i as f64 / n as f64;
                (vec![a; enc.input_dim()], vec![0.5 * a; enc.output_dim()])
            })
            .collect();
        TrainingSet {
            class: OperationClass::Center,
            pairs,
            part_ids: (0..n).map(|i| i.to_string()).collect(),
        }
    }

    #[test]
    fn small_sets_are_refused() {
        let r = teach_set(&toy_set(3), &TeachConfig::default(), &Encoding::default());
        assert!(matches!(r, Err(NeuralError::InsufficientCorpus { pairs: 3, .. })));
    }

    #[test]
    fn zero_rounds_fail() {
        let cfg = TeachConfig {
            max_rounds: 0,
            ..TeachConfig::default()
        };
        match teach_set(&toy_set(10), &cfg, &Encoding::default()) {
            Err(NeuralError::TeachingFailed(r)) => {
                assert_eq!(r.rounds, 0);
                assert_eq!(r.verdict, Verdict::Failure);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn metrics_ignore_order() {
        let ts = toy_set(6);
        let net = Network::random(52, 8, 194, 0.5, 3);
        let mut rev = ts.pairs.clone();
        rev.reverse();
        let a = evaluate(&net, &ts.pairs, 64).unwrap();
        let b = evaluate(&net, &rev, 64).unwrap();
        assert!((a.mean_err - b.mean_err).abs() < 1e-15);
        assert_eq!(a.max_err, b.max_err);
    }

    #[test]
    fn own_predictions_score_zero() {
        let ts = toy_set(6);
        let net = Network::random(52, 8, 194, 0.5, 3);
        let own: Vec<Pair> = ts
            .pairs
            .iter()
            .map(|(x, _)| (x.clone(), net.forward(x).unwrap()))
            .collect();
        let m = evaluate(&net, &own, 64).unwrap();
        assert_eq!((m.mean_err, m.max_err), (0.0, 0.0));
    }
}
