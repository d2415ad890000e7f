//! Linear SVM trained by stochastic subgradient descent on the
//! L2-regularized hinge loss (Pegasos step sizes).

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{Error, Result};
use crate::seed::rng_from;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmTraining {
    pub lambda: f64,
    pub epochs: usize,
}

impl Default for SvmTraining {
    fn default() -> Self {
        SvmTraining {
            lambda: 1e-3,
            epochs: 200,
        }
    }
}

/// Decision function `w · standardize(x) + b`. Negative bags are the +1
/// class, so negative margins are positive-like.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub feature_mean: Vec<f64>,
    pub feature_scale: Vec<f64>,
}

impl LinearSvm {
    pub fn margin(&self, x: &[f64]) -> f64 {
        let mut m = self.bias;
        for (j, &v) in x.iter().enumerate() {
            m += self.weights[j] * (v - self.feature_mean[j]) / self.feature_scale[j];
        }
        m
    }

    pub fn predict(&self, x: &[f64]) -> Label {
        if self.margin(x) < 0.0 {
            Label::Pos
        } else {
            Label::Neg
        }
    }
}

fn standardization(features: &[Vec<f64>], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let n = features.len() as f64;
    let mut mean = vec![0.0; dim];
    for f in features {
        for j in 0..dim {
            mean[j] += f[j];
        }
    }
    for m in mean.iter_mut() {
        *m /= n;
    }
    let mut scale = vec![0.0; dim];
    for f in features {
        for j in 0..dim {
            scale[j] += (f[j] - mean[j]).powi(2) / n;
        }
    }
    // Constant features standardize to zero and never move the margin.
    let scale = scale
        .into_iter()
        .map(|v| if v > 0.0 { v.sqrt() } else { 1.0 })
        .collect();
    (mean, scale)
}

/// Trains on standardized features. The bias is appended as a constant
/// feature and regularized with the weights; the returned model is the
/// average of the iterates over the last epoch.
pub fn train_linear_svm(features: &[Vec<f64>], labels: &[Label], cfg: &SvmTraining, seed: u64) -> Result<LinearSvm> {
    if features.is_empty() || features.len() != labels.len() {
        return Err(Error::invalid("SVM needs one label per feature vector"));
    }
    if !(cfg.lambda > 0.0) || cfg.epochs == 0 {
        return Err(Error::invalid("SVM needs lambda > 0 and at least one epoch"));
    }
    let dim = features[0].len();
    if features.iter().any(|f| f.len() != dim) {
        return Err(Error::invalid("SVM feature vectors differ in length"));
    }
    assert!(
        features.iter().flatten().all(|v| v.is_finite()),
        "divergence features must be finite"
    );
    let (mean, scale) = standardization(features, dim);
    let rows: Vec<Vec<f64>> = features
        .iter()
        .map(|f| {
            let mut r: Vec<f64> = (0..dim).map(|j| (f[j] - mean[j]) / scale[j]).collect();
            r.push(1.0);
            r
        })
        .collect();
    let ys: Vec<f64> = labels.iter().map(|l| if l.is_pos() { -1.0 } else { 1.0 }).collect();

    let mut w = vec![0.0; dim + 1];
    let mut avg = vec![0.0; dim + 1];
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut rng = rng_from(seed);
    let radius = 1.0 / cfg.lambda.sqrt();
    let mut t = 0usize;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (cfg.lambda * t as f64);
            let m: f64 = w.iter().zip(&rows[i]).map(|(a, b)| a * b).sum();
            let shrink = 1.0 - eta * cfg.lambda;
            for v in w.iter_mut() {
                *v *= shrink;
            }
            if ys[i] * m < 1.0 {
                for (v, x) in w.iter_mut().zip(&rows[i]) {
                    *v += eta * ys[i] * x;
                }
            }
            let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > radius {
                for v in w.iter_mut() {
                    *v *= radius / norm;
                }
            }
            if epoch + 1 == cfg.epochs {
                for (a, v) in avg.iter_mut().zip(&w) {
                    *a += v / rows.len() as f64;
                }
            }
        }
    }
    let bias = avg.pop().expect("bias slot");
    Ok(LinearSvm {
        weights: avg,
        bias,
        feature_mean: mean,
        feature_scale: scale,
    })
}
