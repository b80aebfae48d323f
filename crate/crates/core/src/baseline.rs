//! Classical counterpart of the quantum classifier: one fully connected
//! unit with a sigmoid output, trained on binary cross-entropy with Adam.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureMatrix;
use crate::rng::rng_from_seed;
use crate::vqc::Confusion;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BaselineError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset has no labels")]
    Unlabeled,
    #[error("model takes {expected} features, got {got}")]
    FeatureCount { expected: usize, got: usize },
    #[error("training needs at least one epoch")]
    NoEpochs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LogisticModel {
    pub fn zeros(features: usize) -> Self {
        Self {
            weights: vec![0.0; features],
            bias: 0.0,
        }
    }

    pub fn features(&self) -> usize {
        self.weights.len()
    }

    fn check(&self, x: &[f64]) -> Result<(), BaselineError> {
        if x.len() != self.weights.len() {
            return Err(BaselineError::FeatureCount {
                expected: self.weights.len(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn logit(&self, x: &[f64]) -> Result<f64, BaselineError> {
        self.check(x)?;
        Ok(self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias)
    }

    /// Probability of the positive class.
    pub fn probability(&self, x: &[f64]) -> Result<f64, BaselineError> {
        Ok(sigmoid(self.logit(x)?))
    }

    /// `2p - 1`, which shares its sign convention with the quantum score.
    pub fn score(&self, x: &[f64]) -> Result<f64, BaselineError> {
        Ok(2.0 * self.probability(x)? - 1.0)
    }

    pub fn predict(&self, x: &[f64]) -> Result<i8, BaselineError> {
        Ok(if self.score(x)? >= 0.0 { 1 } else { -1 })
    }
}

fn labelled(data: &FeatureMatrix) -> Result<&[i8], BaselineError> {
    if data.is_empty() {
        return Err(BaselineError::EmptyDataset);
    }
    data.labels().ok_or(BaselineError::Unlabeled)
}

/// Mean binary cross-entropy with `+1` mapped to target 1 and `-1` to 0.
pub fn bce_loss(model: &LogisticModel, data: &FeatureMatrix) -> Result<f64, BaselineError> {
    let y = labelled(data)?;
    let mut sum = 0.0;
    for (x, &label) in data.iter_rows().zip(y) {
        let z = model.logit(x)?;
        // log(1 + e^z) - t z, evaluated without overflow.
        let softplus = if z > 0.0 {
            z + (-z).exp().ln_1p()
        } else {
            z.exp().ln_1p()
        };
        let t = if label > 0 { 1.0 } else { 0.0 };
        sum += softplus - t * z;
    }
    Ok(sum / data.rows() as f64)
}

/// Gradient of [`bce_loss`] with respect to `(weights, bias)`.
pub fn bce_gradient(model: &LogisticModel, data: &FeatureMatrix) -> Result<(Vec<f64>, f64), BaselineError> {
    let y = labelled(data)?;
    let mut gw = vec![0.0; model.features()];
    let mut gb = 0.0;
    for (x, &label) in data.iter_rows().zip(y) {
        let t = if label > 0 { 1.0 } else { 0.0 };
        let r = model.probability(x)? - t;
        for (g, v) in gw.iter_mut().zip(x) {
            *g += r * v;
        }
        gb += r;
    }
    let n = data.rows() as f64;
    gw.iter_mut().for_each(|g| *g /= n);
    Ok((gw, gb / n))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Full-batch gradient steps.
    pub epochs: usize,
    pub seed: u64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: 300,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    /// Training loss before each step.
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub final_train_loss: f64,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
}

pub fn confusion(model: &LogisticModel, data: &FeatureMatrix) -> Result<Confusion, BaselineError> {
    let y = labelled(data)?;
    let mut c = Confusion::default();
    for (x, &label) in data.iter_rows().zip(y) {
        c.record(model.predict(x)?, label);
    }
    Ok(c)
}

/// Full-batch Adam on the cross-entropy, starting from small seeded weights.
pub fn train_logistic(
    train_set: &FeatureMatrix,
    val_set: &FeatureMatrix,
    cfg: &AdamConfig,
) -> Result<(LogisticModel, BaselineReport), BaselineError> {
    labelled(train_set)?;
    labelled(val_set)?;
    if cfg.epochs == 0 {
        return Err(BaselineError::NoEpochs);
    }
    let d = train_set.cols();
    let mut rng = rng_from_seed(cfg.seed);
    let mut model = LogisticModel {
        weights: (0..d).map(|_| rng.random_range(-0.1..0.1)).collect(),
        bias: 0.0,
    };
    let mut m = vec![0.0; d + 1];
    let mut v = vec![0.0; d + 1];
    let mut train_loss = Vec::with_capacity(cfg.epochs);
    let mut val_loss = Vec::with_capacity(cfg.epochs);
    for step in 1..=cfg.epochs {
        train_loss.push(bce_loss(&model, train_set)?);
        val_loss.push(bce_loss(&model, val_set)?);
        let (gw, gb) = bce_gradient(&model, train_set)?;
        let c1 = 1.0 - cfg.beta1.powi(step as i32);
        let c2 = 1.0 - cfg.beta2.powi(step as i32);
        for (i, g) in gw.into_iter().chain(core::iter::once(gb)).enumerate() {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            let delta = cfg.learning_rate * (m[i] / c1) / ((v[i] / c2).sqrt() + cfg.epsilon);
            if i < d {
                model.weights[i] -= delta;
            } else {
                model.bias -= delta;
            }
        }
    }
    let report = BaselineReport {
        final_train_loss: bce_loss(&model, train_set)?,
        train_accuracy: confusion(&model, train_set)?.accuracy(),
        val_accuracy: confusion(&model, val_set)?.accuracy(),
        train_loss,
        val_loss,
    };
    Ok((model, report))
}
