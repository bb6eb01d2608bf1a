//! Feed-forward classifier and the uncertainty-decoding rules: arithmetic
//! DNN-output averaging, the MCE misclassification measure, and weighted
//! averaging.

pub mod eval;
pub mod model_io;
pub mod train;

pub use eval::{decode_utterance, evaluate_frame_accuracy, AccuracyReport, LabeledUtterance};
pub use train::{train_mlp, TrainConfig, TrainOutcome};

use crate::error::{Error, Result};
use crate::sampler::SampleSet;

/// Margins below this total fall back to uniform weights.
const EPS_WEIGHT: f64 = 1e-15;

/// Sigmoid-hidden, softmax-output MLP with f64 parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    /// Layer widths, input first: `dims[0]` inputs, `dims.last()` classes.
    pub dims: Vec<usize>,
    /// Per layer, row-major `dims[l+1] x dims[l]`.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl MlpModel {
    /// Zero-initialized model of the given layer widths.
    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::invalid("model needs at least input and output"));
        }
        if dims.contains(&0) {
            return Err(Error::invalid("zero-width layer"));
        }
        let weights = (0..dims.len() - 1)
            .map(|l| vec![0.0; dims[l + 1] * dims[l]])
            .collect();
        let biases = (0..dims.len() - 1).map(|l| vec![0.0; dims[l + 1]]).collect();
        Ok(Self {
            dims,
            weights,
            biases,
        })
    }

    /// Validate that weight and bias shapes chain correctly and all
    /// parameters are finite.
    pub fn validate(&self) -> Result<()> {
        if self.dims.len() < 2 {
            return Err(Error::invalid("model needs at least input and output"));
        }
        let layers = self.dims.len() - 1;
        if self.weights.len() != layers || self.biases.len() != layers {
            return Err(Error::dimension("layer count mismatch"));
        }
        for l in 0..layers {
            if self.weights[l].len() != self.dims[l + 1] * self.dims[l] {
                return Err(Error::dimension(format!("weight shape of layer {l}")));
            }
            if self.biases[l].len() != self.dims[l + 1] {
                return Err(Error::dimension(format!("bias shape of layer {l}")));
            }
            if self.weights[l].iter().chain(self.biases[l].iter()).any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("non-finite parameter in layer {l}")));
            }
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.dims.len() - 1
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// In-place softmax with max subtraction.
fn softmax(z: &mut [f64]) {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

fn affine(weights: &[f64], biases: &[f64], input: &[f64], out: &mut Vec<f64>) {
    let n_out = biases.len();
    let n_in = input.len();
    out.clear();
    for o in 0..n_out {
        let row = &weights[o * n_in..(o + 1) * n_in];
        let mut acc = biases[o];
        for (w, x) in row.iter().zip(input.iter()) {
            acc += w * x;
        }
        out.push(acc);
    }
}

/// Single forward pass; returns the softmax posterior over classes.
pub fn forward(model: &MlpModel, input: &[f64]) -> Result<Vec<f64>> {
    if input.len() != model.input_dim() {
        return Err(Error::dimension(format!(
            "input width {} != model input {}",
            input.len(),
            model.input_dim()
        )));
    }
    let mut a = input.to_vec();
    let mut next = Vec::new();
    for l in 0..model.num_layers() {
        affine(&model.weights[l], &model.biases[l], &a, &mut next);
        if l + 1 < model.num_layers() {
            for v in next.iter_mut() {
                *v = sigmoid(*v);
            }
        } else {
            softmax(&mut next);
        }
        std::mem::swap(&mut a, &mut next);
    }
    Ok(a)
}

/// Index of the largest entry; ties resolve to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Per-sample misclassification measures and the weights derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleWeights {
    /// Margin of each sample: top posterior minus best competitor.
    pub margins: Vec<f64>,
    /// Normalized weights; sum to 1.
    pub weights: Vec<f64>,
}

/// MCE confidence weights over the samples' posteriors: the margin between
/// the most probable and the best competing class, normalized over samples.
/// Fully ambiguous sets (all margins ~ 0) fall back to uniform weights.
pub fn mce_weights(posteriors: &[Vec<f64>]) -> Result<SampleWeights> {
    let l_count = posteriors.len();
    if l_count == 0 {
        return Err(Error::invalid("no posteriors"));
    }
    if posteriors.iter().any(|p| p.len() < 2) {
        return Err(Error::invalid("MCE weights need at least 2 classes"));
    }
    let margins: Vec<f64> = posteriors
        .iter()
        .map(|p| {
            let g = argmax(p);
            let runner_up = p
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != g)
                .map(|(_, v)| *v)
                .fold(f64::NEG_INFINITY, f64::max);
            p[g] - runner_up
        })
        .collect();
    let total: f64 = margins.iter().sum();
    let weights = if total < EPS_WEIGHT {
        vec![1.0 / l_count as f64; l_count]
    } else {
        margins.iter().map(|e| e / total).collect()
    };
    Ok(SampleWeights { margins, weights })
}

/// Posterior of the mean feature: a plain forward pass.
pub fn decode_frame_baseline(model: &MlpModel, frame: &[f64]) -> Result<Vec<f64>> {
    forward(model, frame)
}

fn sample_posteriors(model: &MlpModel, samples: &SampleSet) -> Result<Vec<Vec<f64>>> {
    samples.samples.iter().map(|z| forward(model, z)).collect()
}

/// Arithmetic DNN-output averaging over the sample set.
pub fn decode_frame_arithmetic(model: &MlpModel, samples: &SampleSet) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::invalid("empty sample set"));
    }
    let posteriors = sample_posteriors(model, samples)?;
    Ok(average_posteriors(&posteriors))
}

fn average_posteriors(posteriors: &[Vec<f64>]) -> Vec<f64> {
    let j = posteriors[0].len();
    let mut out = vec![0.0; j];
    for p in posteriors {
        for (acc, v) in out.iter_mut().zip(p.iter()) {
            *acc += v;
        }
    }
    for acc in out.iter_mut() {
        *acc /= posteriors.len() as f64;
    }
    out
}

/// MCE-weighted DNN-output averaging over the sample set.
pub fn decode_frame_weighted(model: &MlpModel, samples: &SampleSet) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::invalid("empty sample set"));
    }
    let posteriors = sample_posteriors(model, samples)?;
    let sw = mce_weights(&posteriors)?;
    Ok(weighted_average(&posteriors, &sw.weights))
}

fn weighted_average(posteriors: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
    let j = posteriors[0].len();
    let mut out = vec![0.0; j];
    for (p, w) in posteriors.iter().zip(weights.iter()) {
        for (acc, v) in out.iter_mut().zip(p.iter()) {
            *acc += w * v;
        }
    }
    out
}
