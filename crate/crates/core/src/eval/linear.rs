//! Linear hinge-loss classifier trained by batch subgradient descent.
//!
//! Minimizes `lambda/2 ||w||^2 + (1/n) sum_i max(0, 1 - y_i (w.x_i + b))`
//! with `lambda = 1 / (penalty * n)`, so a larger penalty weighs the data
//! term more, matching the usual C parameter of a linear SVM. The batch
//! subgradient makes the fit fully deterministic: identical points with
//! opposite labels cancel exactly and leave the model at zero.

use super::{EntityInstance, Split};
use crate::error::Error;
use crate::Result;

/// Penalty values tried when tuning on the validation split.
pub const PENALTY_GRID: [f64; 6] = [0.001, 0.01, 0.1, 1.0, 10.0, 100.0];

const FIT_ITERS: usize = 1500;

#[derive(Debug, Clone)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub penalty: f64,
}

impl LinearModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }

    /// Positive iff the decision value is strictly positive; ties go to
    /// the negative class.
    pub fn predict(&self, x: &[f64]) -> bool {
        self.decision(x) > 0.0
    }
}

/// Fits one model at a fixed penalty.
pub fn fit_hinge(features: &[&[f64]], labels: &[bool], penalty: f64) -> LinearModel {
    let n = features.len();
    debug_assert!(n > 0);
    let dim = features[0].len();
    let lambda = 1.0 / (penalty * n as f64);
    let inv_n = 1.0 / n as f64;
    let radius = 1.0 / lambda.sqrt();

    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut grad = vec![0.0; dim];
    for t in 1..=FIT_ITERS {
        for (g, wi) in grad.iter_mut().zip(&w) {
            *g = lambda * wi;
        }
        let mut grad_b = 0.0;
        for (x, &label) in features.iter().zip(labels) {
            let y = if label { 1.0 } else { -1.0 };
            let margin = y * (w.iter().zip(*x).map(|(wi, xi)| wi * xi).sum::<f64>() + b);
            if margin < 1.0 {
                for (g, xi) in grad.iter_mut().zip(*x) {
                    *g -= inv_n * y * xi;
                }
                grad_b -= inv_n * y;
            }
        }
        let eta = 1.0 / (lambda * t as f64);
        for (wi, g) in w.iter_mut().zip(&grad) {
            *wi -= eta * g;
        }
        b -= eta * grad_b;
        // Projection onto the ball containing the optimum keeps the large
        // early steps bounded.
        let norm = w.iter().map(|wi| wi * wi).sum::<f64>().sqrt();
        if norm > radius {
            let shrink = radius / norm;
            for wi in w.iter_mut() {
                *wi *= shrink;
            }
        }
    }

    LinearModel {
        weights: w,
        bias: b,
        penalty,
    }
}

/// Trains one model per grid penalty on the train split and returns the
/// model with the best validation F1 (first grid entry wins ties),
/// together with that F1.
pub fn train_linear(
    features: &[Vec<f64>],
    instances: &[EntityInstance],
    penalty_grid: &[f64],
) -> Result<(LinearModel, f64)> {
    assert_eq!(features.len(), instances.len());
    let select = |split: Split| -> (Vec<&[f64]>, Vec<bool>) {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (x, inst) in features.iter().zip(instances) {
            if inst.split == split {
                xs.push(x.as_slice());
                ys.push(inst.label);
            }
        }
        (xs, ys)
    };
    let (train_x, train_y) = select(Split::Train);
    let (valid_x, valid_y) = select(Split::Valid);
    if train_x.is_empty() || valid_x.is_empty() {
        return Err(Error::Data(
            "train and validation splits must both be non-empty".to_string(),
        ));
    }
    if train_y.iter().all(|&y| y) || train_y.iter().all(|&y| !y) {
        return Err(Error::Data(
            "training split contains a single class".to_string(),
        ));
    }
    if penalty_grid.is_empty() {
        return Err(Error::Data("penalty grid is empty".to_string()));
    }

    let mut best: Option<(LinearModel, f64)> = None;
    for &penalty in penalty_grid {
        let model = fit_hinge(&train_x, &train_y, penalty);
        let preds: Vec<bool> = valid_x.iter().map(|x| model.predict(x)).collect();
        let score = super::f1(&preds, &valid_y);
        if best.as_ref().is_none_or(|(_, s)| score > *s) {
            best = Some((model, score));
        }
    }
    Ok(best.unwrap())
}
