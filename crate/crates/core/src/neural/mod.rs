//! The learning NC generator: fixed-length encodings of features and
//! toolpaths, a three-layer network per operation class, the teaching loop
//! driven by the process planner, and generation for unseen parts.

pub mod bank;
pub mod encode;
pub mod network;
pub mod teach;

use thiserror::Error;

use crate::geometry::{distance_to_segment3, Point3};
use crate::planner::PlanError;
use crate::recognition::{OperationClass, RecognitionError};

pub use bank::{generate, Bank, BankEntry, BANK_VERSION};
pub use encode::{decode_toolpath, encode_feature, encode_toolpath, resample_polyline, Decoded, Encoding};
pub use network::{train, Gradients, HyperParams, Network, Pair};
pub use teach::{
    build_training_set, decide_teaching, evaluate, teach_loop, teach_set, Decision, Metrics, TeachConfig,
    TeachReport, Thresholds, TrainingSet, Verdict,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NeuralError {
    #[error("path has no length")]
    DegeneratePath,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("training diverged at epoch {0}")]
    NonFiniteLoss(usize),
    #[error("{class}: only {pairs} training pairs, at least 5 needed")]
    InsufficientCorpus { class: OperationClass, pairs: usize },
    #[error("{}: teaching failed after {} rounds", .0.class, .0.rounds)]
    TeachingFailed(Box<TeachReport>),
    #[error("no network for {0} in the bank")]
    MissingNetwork(OperationClass),
    #[error("bank version {found} is not supported (expected {expected})")]
    BankVersion { found: u32, expected: u32 },
    #[error("bank: {0}")]
    Bank(String),
    #[error("corpus: {0}")]
    Corpus(String),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Recognition(#[from] RecognitionError),
}

fn densify(poly: &[Point3], step: f64) -> Vec<Point3> {
    let mut out = Vec::new();
    for w in poly.windows(2) {
        let n = (w[0].distance(w[1]) / step).ceil().max(1.0) as usize;
        for i in 0..n {
            out.push(w[0].lerp(w[1], i as f64 / n as f64));
        }
    }
    if let Some(l) = poly.last() {
        out.push(*l);
    }
    out
}

fn directed(a: &[Point3], b: &[Point3], step: f64) -> f64 {
    let dist_to = |p: Point3| -> f64 {
        if b.len() == 1 {
            return p.distance(b[0]);
        }
        b.windows(2)
            .map(|w| distance_to_segment3(p, w[0], w[1]))
            .fold(f64::INFINITY, f64::min)
    };
    densify(a, step).into_iter().map(dist_to).fold(0.0, f64::max)
}

/// Symmetric Hausdorff distance between two polylines. Each is sampled at
/// `step` spacing and measured exactly against the other's segments, so the
/// result is low by at most `step / 2`.
pub fn hausdorff(a: &[Point3], b: &[Point3], step: f64) -> f64 {
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    directed(a, b, step).max(directed(b, a, step))
}
