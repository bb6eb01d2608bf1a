//! Minimal deterministic MLP trainer: mini-batch SGD with momentum on the
//! cross-entropy loss.

use crate::error::{Error, Result};
use crate::posterior::MlpModel;
use crate::rng::{CounterRng, SeqRng};

const TAG_INIT: u64 = 0x494E_4954; // "INIT"
const TAG_SHUFFLE: u64 = 0x5348_5546; // "SHUF"

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            epochs: 20,
            batch_size: 32,
            learning_rate: 0.3,
            momentum: 0.9,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: MlpModel,
    /// Mean cross-entropy per epoch, evaluated before each update.
    pub epoch_losses: Vec<f64>,
}

/// Per-layer parameter gradients, same shapes as the model.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

/// Xavier-style init: zero biases, normal weights with
/// `std = sqrt(2 / (fan_in + fan_out))`.
pub fn init_model(dims: &[usize], seed: u64) -> Result<MlpModel> {
    let mut model = MlpModel::zeros(dims.to_vec())?;
    let rng = CounterRng::new(seed).stream(TAG_INIT);
    for l in 0..model.num_layers() {
        let std = (2.0 / (dims[l] + dims[l + 1]) as f64).sqrt();
        let layer_rng = rng.stream(l as u64);
        for (k, w) in model.weights[l].iter_mut().enumerate() {
            *w = std * layer_rng.gaussian_at(k as u64);
        }
    }
    Ok(model)
}

fn forward_all(model: &MlpModel, input: &[f64]) -> Vec<Vec<f64>> {
    let mut acts = Vec::with_capacity(model.dims.len());
    acts.push(input.to_vec());
    for l in 0..model.num_layers() {
        let prev = acts.last().unwrap();
        let n_in = model.dims[l];
        let n_out = model.dims[l + 1];
        let mut z = vec![0.0; n_out];
        for o in 0..n_out {
            let row = &model.weights[l][o * n_in..(o + 1) * n_in];
            let mut acc = model.biases[l][o];
            for (w, x) in row.iter().zip(prev.iter()) {
                acc += w * x;
            }
            z[o] = acc;
        }
        if l + 1 < model.num_layers() {
            for v in z.iter_mut() {
                *v = 1.0 / (1.0 + (-*v).exp());
            }
        } else {
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
        acts.push(z);
    }
    acts
}

/// Mean cross-entropy and its parameter gradients over a batch.
pub fn loss_and_gradients(
    model: &MlpModel,
    inputs: &[Vec<f64>],
    labels: &[usize],
) -> Result<(f64, Gradients)> {
    if inputs.is_empty() || inputs.len() != labels.len() {
        return Err(Error::invalid("empty batch or label length mismatch"));
    }
    let j = model.output_dim();
    let layers = model.num_layers();
    let mut grads = Gradients {
        weights: model.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
        biases: model.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
    };
    let inv_b = 1.0 / inputs.len() as f64;
    let mut loss = 0.0;
    for (x, &y) in inputs.iter().zip(labels.iter()) {
        if y >= j {
            return Err(Error::invalid(format!("label {y} >= {j} classes")));
        }
        let acts = forward_all(model, x);
        let p = acts.last().unwrap();
        loss -= p[y].max(1e-300).ln() * inv_b;
        // softmax + cross-entropy delta
        let mut delta: Vec<f64> = p.iter().enumerate().map(|(k, &v)| {
            (v - if k == y { 1.0 } else { 0.0 }) * inv_b
        }).collect();
        for l in (0..layers).rev() {
            let n_in = model.dims[l];
            let a_prev = &acts[l];
            for (o, &d) in delta.iter().enumerate() {
                let row = &mut grads.weights[l][o * n_in..(o + 1) * n_in];
                for (g, &a) in row.iter_mut().zip(a_prev.iter()) {
                    *g += d * a;
                }
                grads.biases[l][o] += d;
            }
            if l > 0 {
                let mut next_delta = vec![0.0; n_in];
                for (o, &d) in delta.iter().enumerate() {
                    let row = &model.weights[l][o * n_in..(o + 1) * n_in];
                    for (nd, &w) in next_delta.iter_mut().zip(row.iter()) {
                        *nd += d * w;
                    }
                }
                for (nd, &a) in next_delta.iter_mut().zip(acts[l].iter()) {
                    *nd *= a * (1.0 - a);
                }
                delta = next_delta;
            }
        }
    }
    Ok((loss, grads))
}

/// Train on labeled vectors. Deterministic for a given seed: the same data
/// and config always produce the same model.
pub fn train_mlp(
    inputs: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    if inputs.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    if inputs.len() != labels.len() {
        return Err(Error::dimension("inputs and labels differ in length"));
    }
    if n_classes < 2 {
        return Err(Error::invalid("need at least 2 classes"));
    }
    if cfg.batch_size == 0 {
        return Err(Error::invalid("batch_size must be positive"));
    }
    let dim = inputs[0].len();
    if inputs.iter().any(|x| x.len() != dim) {
        return Err(Error::dimension("ragged training inputs"));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= n_classes) {
        return Err(Error::invalid(format!("label {bad} >= {n_classes}")));
    }
    let first = labels[0];
    if labels.iter().all(|&y| y == first) {
        return Err(Error::invalid("degenerate dataset: single class"));
    }

    let mut dims = vec![dim];
    dims.extend_from_slice(&cfg.hidden);
    dims.push(n_classes);
    let mut model = init_model(&dims, cfg.seed)?;
    let mut vel_w: Vec<Vec<f64>> = model.weights.iter().map(|w| vec![0.0; w.len()]).collect();
    let mut vel_b: Vec<Vec<f64>> = model.biases.iter().map(|b| vec![0.0; b.len()]).collect();

    let shuffle_rng = CounterRng::new(cfg.seed).stream(TAG_SHUFFLE);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        SeqRng::new(shuffle_rng.stream(epoch as u64)).shuffle(&mut order);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch_x: Vec<Vec<f64>> = chunk.iter().map(|&i| inputs[i].clone()).collect();
            let batch_y: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let (loss, grads) = loss_and_gradients(&model, &batch_x, &batch_y)?;
            epoch_loss += loss;
            batches += 1;
            for l in 0..model.num_layers() {
                for k in 0..model.weights[l].len() {
                    vel_w[l][k] =
                        cfg.momentum * vel_w[l][k] - cfg.learning_rate * grads.weights[l][k];
                    model.weights[l][k] += vel_w[l][k];
                }
                for k in 0..model.biases[l].len() {
                    vel_b[l][k] =
                        cfg.momentum * vel_b[l][k] - cfg.learning_rate * grads.biases[l][k];
                    model.biases[l][k] += vel_b[l][k];
                }
            }
        }
        epoch_losses.push(epoch_loss / batches.max(1) as f64);
    }
    Ok(TrainOutcome {
        model,
        epoch_losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::posterior::{argmax, forward};
    use crate::rng::CounterRng;

    fn toy_two_class(n_per: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let rng = CounterRng::new(seed);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..n_per {
            let g = |k: u64| rng.gaussian_at(i as u64 * 4 + k) * 0.3;
            xs.push(vec![-1.0 + g(0), -1.0 + g(1)]);
            ys.push(0);
            xs.push(vec![1.0 + g(2), 1.0 + g(3)]);
            ys.push(1);
        }
        (xs, ys)
    }

    #[test]
    fn separable_toy_set_reaches_high_accuracy() {
        let (xs, ys) = toy_two_class(100, 1);
        let cfg = TrainConfig {
            hidden: vec![8],
            epochs: 200,
            batch_size: 16,
            learning_rate: 0.5,
            momentum: 0.9,
            seed: 7,
        };
        let out = train_mlp(&xs, &ys, 2, &cfg).unwrap();
        let correct = xs
            .iter()
            .zip(ys.iter())
            .filter(|(x, &y)| argmax(&forward(&out.model, x).unwrap()) == y)
            .count();
        let acc = correct as f64 / xs.len() as f64;
        assert!(acc >= 0.99, "training accuracy {acc}");
        // loss decreases over the first epoch
        assert!(out.epoch_losses.last().unwrap() < &out.epoch_losses[0]);
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let (xs, ys) = toy_two_class(20, 2);
        let cfg = TrainConfig {
            hidden: vec![4],
            epochs: 3,
            batch_size: 8,
            learning_rate: 0.0,
            momentum: 0.9,
            seed: 5,
        };
        let out = train_mlp(&xs, &ys, 2, &cfg).unwrap();
        let init = init_model(&[2, 4, 2], 5).unwrap();
        assert_eq!(out.model, init);
    }

    #[test]
    fn training_is_deterministic() {
        let (xs, ys) = toy_two_class(30, 3);
        let cfg = TrainConfig {
            hidden: vec![6],
            epochs: 5,
            batch_size: 8,
            learning_rate: 0.2,
            momentum: 0.9,
            seed: 11,
        };
        let a = train_mlp(&xs, &ys, 2, &cfg).unwrap();
        let b = train_mlp(&xs, &ys, 2, &cfg).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.epoch_losses, b.epoch_losses);
    }

    #[test]
    fn single_class_rejected() {
        let xs = vec![vec![0.0, 1.0]; 10];
        let ys = vec![1usize; 10];
        assert!(train_mlp(&xs, &ys, 2, &TrainConfig::default()).is_err());
    }

    #[test]
    fn gradients_match_central_finite_differences() {
        let mut model = init_model(&[3, 3, 2], 13).unwrap();
        // nonzero biases so their gradients are exercised from a generic point
        let brng = CounterRng::new(14);
        let mut c = 0u64;
        for l in 0..model.num_layers() {
            for b in model.biases[l].iter_mut() {
                *b = 0.1 * brng.gaussian_at(c);
                c += 1;
            }
        }
        let rng = CounterRng::new(15);
        let inputs: Vec<Vec<f64>> = (0..10)
            .map(|i| (0..3).map(|d| rng.gaussian_at(i * 3 + d)).collect())
            .collect();
        let labels: Vec<usize> = (0..10).map(|i| (rng.u64_at(1000 + i) % 2) as usize).collect();
        let (_, grads) = loss_and_gradients(&model, &inputs, &labels).unwrap();
        let h = 1e-5;
        let mut worst = 0.0f64;
        for l in 0..model.num_layers() {
            for k in 0..model.weights[l].len() {
                let orig = model.weights[l][k];
                model.weights[l][k] = orig + h;
                let (lp, _) = loss_and_gradients(&model, &inputs, &labels).unwrap();
                model.weights[l][k] = orig - h;
                let (lm, _) = loss_and_gradients(&model, &inputs, &labels).unwrap();
                model.weights[l][k] = orig;
                let fd = (lp - lm) / (2.0 * h);
                let a = grads.weights[l][k];
                worst = worst.max((a - fd).abs() / a.abs().max(fd.abs()).max(1e-8));
            }
            for k in 0..model.biases[l].len() {
                let orig = model.biases[l][k];
                model.biases[l][k] = orig + h;
                let (lp, _) = loss_and_gradients(&model, &inputs, &labels).unwrap();
                model.biases[l][k] = orig - h;
                let (lm, _) = loss_and_gradients(&model, &inputs, &labels).unwrap();
                model.biases[l][k] = orig;
                let fd = (lp - lm) / (2.0 * h);
                let a = grads.biases[l][k];
                worst = worst.max((a - fd).abs() / a.abs().max(fd.abs()).max(1e-8));
            }
        }
        assert!(worst < 1e-4, "max relative gradient error {worst}");
    }
}
