//! One-hidden-layer network: tanh hidden units, softmax output over the nine
//! fault classes, trained by mini-batch gradient descent on cross-entropy.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_dim, Classifier, LabeledDataset, Prediction};
use crate::error::{Error, Result};
use crate::ingest::FaultLabel;
use crate::rng;

const OUT: usize = FaultLabel::COUNT;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnParams {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Learning rate at epoch `e` is `learning_rate / (1 + lr_decay * e)`.
    pub lr_decay: f64,
    pub batch_size: usize,
    pub init_scale: f64,
}

impl Default for AnnParams {
    fn default() -> Self {
        Self {
            hidden: 5,
            epochs: 2000,
            learning_rate: 0.01,
            lr_decay: 0.0,
            batch_size: 32,
            init_scale: 0.1,
        }
    }
}

/// Parameters are stored flat: `w1` (hidden x input, row-major), `b1`,
/// `w2` (9 x hidden), `b2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnModel {
    pub input_dim: usize,
    pub hidden: usize,
    pub params: Vec<f64>,
}

struct Layout {
    input: usize,
    hidden: usize,
}

impl Layout {
    fn w1(&self) -> usize {
        0
    }
    fn b1(&self) -> usize {
        self.hidden * self.input
    }
    fn w2(&self) -> usize {
        self.b1() + self.hidden
    }
    fn b2(&self) -> usize {
        self.w2() + OUT * self.hidden
    }
    fn len(&self) -> usize {
        self.b2() + OUT
    }
}

impl AnnModel {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        let len = Layout { input: input_dim, hidden }.len();
        Self {
            input_dim,
            hidden,
            params: vec![0.0; len],
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.layout().len()
    }

    fn layout(&self) -> Layout {
        Layout {
            input: self.input_dim,
            hidden: self.hidden,
        }
    }

    /// Hidden activations and softmax output for one input.
    pub fn forward(&self, x: &[f64]) -> (Vec<f64>, [f64; OUT]) {
        forward(&self.layout(), &self.params, x)
    }

    /// Mean cross-entropy over the batch and its gradient with respect to
    /// the flat parameter vector.
    pub fn loss_and_gradient(&self, batch: &[(&[f64], usize)]) -> (f64, Vec<f64>) {
        loss_and_gradient(&self.layout(), &self.params, batch)
    }

    pub fn loss(&self, batch: &[(&[f64], usize)]) -> f64 {
        let l = self.layout();
        batch
            .iter()
            .map(|(x, y)| -forward(&l, &self.params, x).1[*y].ln())
            .sum::<f64>()
            / batch.len() as f64
    }
}

fn forward(l: &Layout, p: &[f64], x: &[f64]) -> (Vec<f64>, [f64; OUT]) {
    let h: Vec<f64> = (0..l.hidden)
        .map(|j| {
            let row = &p[l.w1() + j * l.input..l.w1() + (j + 1) * l.input];
            let z = p[l.b1() + j] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            z.tanh()
        })
        .collect();
    let mut o = [0.0; OUT];
    for (k, ok) in o.iter_mut().enumerate() {
        let row = &p[l.w2() + k * l.hidden..l.w2() + (k + 1) * l.hidden];
        *ok = p[l.b2() + k] + row.iter().zip(&h).map(|(w, v)| w * v).sum::<f64>();
    }
    (h, softmax(o))
}

fn softmax(mut o: [f64; OUT]) -> [f64; OUT] {
    let m = o.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in o.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    for v in o.iter_mut() {
        *v /= s;
    }
    o
}

fn loss_and_gradient(l: &Layout, p: &[f64], batch: &[(&[f64], usize)]) -> (f64, Vec<f64>) {
    let mut g = vec![0.0; l.len()];
    let mut loss = 0.0;
    let scale = 1.0 / batch.len() as f64;
    for &(x, y) in batch {
        let (h, prob) = forward(l, p, x);
        loss -= prob[y].ln();
        let mut delta_out = prob;
        delta_out[y] -= 1.0;
        let mut delta_h = vec![0.0; l.hidden];
        for k in 0..OUT {
            let d = delta_out[k] * scale;
            g[l.b2() + k] += d;
            for j in 0..l.hidden {
                g[l.w2() + k * l.hidden + j] += d * h[j];
                delta_h[j] += delta_out[k] * p[l.w2() + k * l.hidden + j];
            }
        }
        for j in 0..l.hidden {
            let d = delta_h[j] * (1.0 - h[j] * h[j]) * scale;
            g[l.b1() + j] += d;
            for (i, v) in x.iter().enumerate() {
                g[l.w1() + j * l.input + i] += d * v;
            }
        }
    }
    (loss * scale, g)
}

pub fn train_ann(data: &LabeledDataset, params: &AnnParams, seed: u64) -> Result<AnnModel> {
    train_ann_traced(data, params, seed).map(|(m, _)| m)
}

/// Trains and also returns the mean training loss of every epoch.
pub fn train_ann_traced(data: &LabeledDataset, params: &AnnParams, seed: u64) -> Result<(AnnModel, Vec<f64>)> {
    if params.hidden == 0 || params.batch_size == 0 || !(params.learning_rate > 0.0) {
        return Err(Error::InvalidConfig(
            "ann hidden, batch size and learning rate must be positive".into(),
        ));
    }
    data.require_classes()?;
    let mut model = AnnModel::zeros(data.feature_dim(), params.hidden);
    let mut init = rng::stream(seed, 0);
    let s = params.init_scale;
    for w in model.params.iter_mut() {
        *w = if s > 0.0 { init.gen_range(-s..s) } else { 0.0 };
    }

    let samples: Vec<(&[f64], usize)> = data
        .rows()
        .iter()
        .map(|r| (r.features.as_slice(), r.label.code()))
        .collect();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut shuffle = rng::stream(seed, 1);
    let layout = model.layout();
    let mut trace = Vec::with_capacity(params.epochs);
    let mut batch = Vec::with_capacity(params.batch_size);
    for epoch in 0..params.epochs {
        order.shuffle(&mut shuffle);
        let lr = params.learning_rate / (1.0 + params.lr_decay * epoch as f64);
        let mut total = 0.0;
        for chunk in order.chunks(params.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| samples[i]));
            let (loss, grad) = loss_and_gradient(&layout, &model.params, &batch);
            if !loss.is_finite() {
                return Err(Error::Diverged);
            }
            total += loss * chunk.len() as f64;
            for (w, g) in model.params.iter_mut().zip(&grad) {
                *w -= lr * g;
            }
        }
        trace.push(total / samples.len() as f64);
    }
    if model.params.iter().any(|w| !w.is_finite()) {
        return Err(Error::Diverged);
    }
    Ok((model, trace))
}

impl Classifier for AnnModel {
    fn predict(&self, x: &[f64]) -> Result<Prediction> {
        check_dim(self.input_dim, x)?;
        let (_, prob) = self.forward(x);
        let mut best = 0;
        for k in 1..OUT {
            if prob[k] > prob[best] {
                best = k;
            }
        }
        Ok(Prediction {
            label: FaultLabel::ALL[best],
            confidence: prob[best],
        })
    }
}
