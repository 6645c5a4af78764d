//! Multinomial logistic regression over sparse features, trained by
//! full-batch gradient descent. Zero initialization plus a fixed schedule
//! keeps training deterministic with no RNG involved.

use serde::{Deserialize, Serialize};

use crate::par;

/// A sparse training or scoring example: (feature id, value) pairs.
pub type SparseFeatures = Vec<(usize, f64)>;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LogRegSettings {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
}

impl Default for LogRegSettings {
    fn default() -> Self {
        Self { epochs: 60, learning_rate: 2.0, l2: 1e-4 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SparseLogReg {
    pub n_classes: usize,
    pub n_features: usize,
    /// Row-major `n_classes x n_features`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

const GRAD_CHUNK: usize = 512;

impl SparseLogReg {
    pub fn new(n_classes: usize, n_features: usize) -> Self {
        Self {
            n_classes,
            n_features,
            weights: vec![0.0; n_classes * n_features],
            bias: vec![0.0; n_classes],
        }
    }

    /// Class distribution for one example (softmax over class scores).
    pub fn predict(&self, features: &[(usize, f64)]) -> Vec<f64> {
        let mut logits = self.bias.clone();
        for &(feat, value) in features {
            debug_assert!(feat < self.n_features);
            for (c, logit) in logits.iter_mut().enumerate() {
                *logit += self.weights[c * self.n_features + feat] * value;
            }
        }
        softmax(&logits)
    }

    /// Full-batch gradient descent on the mean cross-entropy.
    ///
    /// Gradients are accumulated per fixed-size chunk and the chunk partials
    /// are summed in order, so results do not depend on the thread count.
    pub fn train(&mut self, examples: &[(SparseFeatures, usize)], settings: &LogRegSettings) {
        if examples.is_empty() {
            return;
        }
        let n = examples.len() as f64;
        let chunks: Vec<&[(SparseFeatures, usize)]> = examples.chunks(GRAD_CHUNK).collect();
        for _ in 0..settings.epochs {
            let partials = par::map_slice(&chunks, |chunk| {
                let mut gw = vec![0.0; self.weights.len()];
                let mut gb = vec![0.0; self.bias.len()];
                for (features, label) in chunk.iter() {
                    let probs = self.predict(features);
                    for c in 0..self.n_classes {
                        let delta = probs[c] - if c == *label { 1.0 } else { 0.0 };
                        gb[c] += delta;
                        for &(feat, value) in features {
                            gw[c * self.n_features + feat] += delta * value;
                        }
                    }
                }
                (gw, gb)
            });
            let mut gw = vec![0.0; self.weights.len()];
            let mut gb = vec![0.0; self.bias.len()];
            for (pw, pb) in &partials {
                for (acc, p) in gw.iter_mut().zip(pw) {
                    *acc += p;
                }
                for (acc, p) in gb.iter_mut().zip(pb) {
                    *acc += p;
                }
            }
            let lr = settings.learning_rate;
            for (w, g) in self.weights.iter_mut().zip(&gw) {
                *w -= lr * (g / n + settings.l2 * *w);
            }
            for (b, g) in self.bias.iter_mut().zip(&gb) {
                *b -= lr * g / n;
            }
        }
    }

    /// Mean cross-entropy over a labelled set.
    pub fn mean_loss(&self, examples: &[(SparseFeatures, usize)]) -> f64 {
        let losses = par::map_slice(examples, |(features, label)| {
            let probs = self.predict(features);
            -probs[*label].max(1e-300).ln()
        });
        losses.iter().sum::<f64>() / examples.len() as f64
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_data_is_learned() {
        // feature 0 -> class 0, feature 1 -> class 1
        let examples: Vec<(SparseFeatures, usize)> = (0..100)
            .map(|i| {
                let class = i % 2;
                (vec![(class, 1.0)], class)
            })
            .collect();
        let mut model = SparseLogReg::new(2, 2);
        let before = model.mean_loss(&examples);
        model.train(&examples, &LogRegSettings::default());
        let after = model.mean_loss(&examples);
        assert!(after < before);
        assert!(model.predict(&[(0, 1.0)])[0] > 0.9);
        assert!(model.predict(&[(1, 1.0)])[1] > 0.9);
    }

    #[test]
    fn predictions_are_a_distribution() {
        let mut model = SparseLogReg::new(3, 4);
        model.weights.iter_mut().enumerate().for_each(|(i, w)| *w = (i as f64 * 0.13).sin());
        model.bias = vec![0.2, -0.4, 0.1];
        let probs = model.predict(&[(0, 2.0), (3, 1.0)]);
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        assert!(probs.iter().all(|p| *p > 0.0));
    }

    #[test]
    fn no_features_gives_bias_only_prediction() {
        let mut model = SparseLogReg::new(2, 3);
        model.bias = vec![0.3, -0.3];
        let a = model.predict(&[]);
        let b = model.predict(&[]);
        assert_eq!(a, b);
        assert!((a[0] - softmax(&[0.3, -0.3])[0]).abs() < 1e-15);
    }

    #[test]
    fn training_is_deterministic() {
        let examples: Vec<(SparseFeatures, usize)> = (0..500)
            .map(|i| (vec![(i % 7, 1.0), ((i * 3) % 7, 0.5)], i % 3))
            .collect();
        let mut a = SparseLogReg::new(3, 7);
        let mut b = SparseLogReg::new(3, 7);
        a.train(&examples, &LogRegSettings::default());
        b.train(&examples, &LogRegSettings::default());
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.bias, b.bias);
    }
}
