//! Binary is-pointing classifier: standardized logistic regression fit by
//! full-batch gradient descent from zero initialization.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::features::{FeatureMode, FeatureVector};
use crate::error::{Error, Result};
use crate::pointing::GeometryMode;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    pub l2: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 500,
            learning_rate: 0.1,
            l2: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub mode: FeatureMode,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub threshold: f64,
    /// Geometry the training features were computed with, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GeometryMode>,
}

/// One labeled training row.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: FeatureVector,
    pub is_pointing: bool,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl ClassifierModel {
    /// An untrained model: zero weights, identity standardization.
    pub fn zeroed(mode: FeatureMode) -> Self {
        let d = mode.dims();
        Self {
            mode,
            weights: vec![0.0; d],
            bias: 0.0,
            means: vec![0.0; d],
            stds: vec![1.0; d],
            threshold: 0.5,
            geometry: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.mode.dims();
        if self.weights.len() != d || self.means.len() != d || self.stds.len() != d {
            return Err(Error::validation(format!(
                "model dimensions do not match {} mode ({d})",
                self.mode
            )));
        }
        if self.stds.iter().any(|s| s.is_nan() || *s <= 0.0) {
            return Err(Error::validation("model stds must be positive"));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::validation("model threshold outside [0,1]"));
        }
        let all = self.weights.iter().chain(&self.means).chain(&self.stds);
        if !all.chain([&self.bias]).all(|v| v.is_finite()) {
            return Err(Error::validation("model parameters must be finite"));
        }
        Ok(())
    }

    pub fn logit(&self, features: &FeatureVector) -> Result<f64> {
        if features.mode != self.mode {
            return Err(Error::ModeMismatch {
                expected: self.mode.as_str(),
                actual: features.mode.as_str(),
            });
        }
        Ok(self.logit_unchecked(&features.values))
    }

    fn logit_unchecked(&self, values: &[f64]) -> f64 {
        values
            .iter()
            .zip(&self.means)
            .zip(&self.stds)
            .zip(&self.weights)
            .map(|(((x, m), s), w)| w * (x - m) / s)
            .sum::<f64>()
            + self.bias
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: Self = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self).expect("model serializes");
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Probability of pointing and the thresholded verdict.
pub fn predict_pointing(model: &ClassifierModel, features: &FeatureVector) -> Result<(f64, bool)> {
    let p = sigmoid(model.logit(features)?);
    Ok((p, p >= model.threshold))
}

/// Fits a model to `examples`. Deterministic for fixed input order and config.
pub fn fit(
    examples: &[Example],
    mode: FeatureMode,
    config: &TrainConfig,
) -> Result<ClassifierModel> {
    fit_traced(examples, mode, config).map(|(model, _)| model)
}

/// As [`fit`], also returning the regularized loss before each update and
/// after the last one.
pub fn fit_traced(
    examples: &[Example],
    mode: FeatureMode,
    config: &TrainConfig,
) -> Result<(ClassifierModel, Vec<f64>)> {
    if examples.is_empty() {
        return Err(Error::Training("no training examples".into()));
    }
    let positives = examples.iter().filter(|e| e.is_pointing).count();
    if positives == 0 || positives == examples.len() {
        return Err(Error::Training(
            "training set contains a single class".into(),
        ));
    }
    if let Some(bad) = examples.iter().find(|e| e.features.mode != mode) {
        return Err(Error::ModeMismatch {
            expected: mode.as_str(),
            actual: bad.features.mode.as_str(),
        });
    }

    let d = mode.dims();
    let n = examples.len() as f64;
    let mut means = vec![0.0; d];
    for e in examples {
        for (m, x) in means.iter_mut().zip(&e.features.values) {
            *m += x;
        }
    }
    means.iter_mut().for_each(|m| *m /= n);
    let mut stds = vec![0.0; d];
    for e in examples {
        for ((s, x), m) in stds.iter_mut().zip(&e.features.values).zip(&means) {
            *s += (x - m) * (x - m);
        }
    }
    for s in &mut stds {
        *s = (*s / n).sqrt();
        if s.is_nan() || *s <= 1e-12 {
            *s = 1.0;
        }
    }

    let rows: Vec<(Vec<f64>, f64)> = examples
        .iter()
        .map(|e| {
            let x = e
                .features
                .values
                .iter()
                .zip(&means)
                .zip(&stds)
                .map(|((x, m), s)| (x - m) / s)
                .collect();
            (x, if e.is_pointing { 1.0 } else { 0.0 })
        })
        .collect();

    let loss = |w: &[f64], b: f64| -> f64 {
        let data: f64 = rows
            .iter()
            .map(|(x, y)| {
                let z = dot(w, x) + b;
                // -[y ln p + (1-y) ln(1-p)]
                softplus(z) - y * z
            })
            .sum::<f64>()
            / n;
        data + 0.5 * config.l2 * dot(w, w)
    };

    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut losses = Vec::with_capacity(config.iterations + 1);
    let mut grad = vec![0.0; d];
    for _ in 0..config.iterations {
        losses.push(loss(&w, b));
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0;
        for (x, y) in &rows {
            let r = sigmoid(dot(&w, x) + b) - y;
            for (g, xi) in grad.iter_mut().zip(x) {
                *g += r * xi;
            }
            grad_b += r;
        }
        for (wi, g) in w.iter_mut().zip(&grad) {
            *wi -= config.learning_rate * (g / n + config.l2 * *wi);
        }
        b -= config.learning_rate * grad_b / n;
    }
    let final_loss = loss(&w, b);
    losses.push(final_loss);
    if !final_loss.is_finite() || w.iter().any(|v| !v.is_finite()) {
        return Err(Error::Training(
            "loss diverged to a non-finite value".into(),
        ));
    }

    let model = ClassifierModel {
        mode,
        weights: w,
        bias: b,
        means,
        stds,
        threshold: 0.5,
        geometry: None,
    };
    Ok((model, losses))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
