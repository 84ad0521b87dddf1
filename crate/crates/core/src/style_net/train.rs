use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::nn::{sgd_step, Layer, SgdMomentum, Tensor};

use super::{StyleError, StyleNet};

/// Training hyperparameters. Deterministic for a fixed seed.
#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f32,
    pub momentum: f32,
    /// Update factor for normalization running statistics.
    pub norm_momentum: f32,
    /// Global L2 gradient-norm clip; tames spikes when a normalization
    /// channel's variance collapses. Non-finite or <= 0 disables clipping.
    pub grad_clip: f32,
    /// Stop early once validation accuracy reaches this value.
    pub stop_at_val_accuracy: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            learning_rate: 0.01,
            momentum: 0.9,
            norm_momentum: 0.1,
            grad_clip: 5.0,
            stop_at_val_accuracy: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
}

/// Cross-entropy SGD over single samples: every patch position of a sample
/// shares its label, and the loss averages over positions.
///
/// Normalization layers fold each sample's statistics into their running
/// statistics after the gradient step; validation accuracy is measured
/// after each epoch.
pub fn train(
    net: &mut StyleNet,
    train_set: &[(Tensor<f32>, usize)],
    val_set: &[(Tensor<f32>, usize)],
    config: &TrainConfig,
) -> Result<Vec<EpochMetrics>, StyleError> {
    if train_set.is_empty() {
        return Err(StyleError::EmptyDataset);
    }
    let classes = net.class_count();
    for (input, label) in train_set.iter().chain(val_set) {
        StyleNet::check_input(input)?;
        if *label >= classes {
            return Err(StyleError::LabelOutOfRange { label: *label, classes });
        }
    }
    {
        let mut seen = vec![false; classes];
        for (_, label) in train_set {
            seen[*label] = true;
        }
        if seen.iter().filter(|s| **s).count() < 2 {
            return Err(StyleError::SingleClassDataset);
        }
    }

    let mut state = SgdMomentum::new(config.learning_rate, config.momentum)
        .map_err(StyleError::Tensor)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut metrics = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0f64;
        let mut correct = 0usize;

        for &idx in &order {
            let (input, label) = &train_set[idx];
            let (loss, predicted) = train_step(net, input, *label, config, &mut state)?;
            if !loss.is_finite() {
                return Err(StyleError::TrainingDiverged { epoch });
            }
            loss_sum += loss;
            if predicted == *label {
                correct += 1;
            }
        }

        let mut val_correct = 0usize;
        for (input, label) in val_set {
            let result = net.infer(input)?;
            if result.ranked[0].index == *label {
                val_correct += 1;
            }
        }

        let val_accuracy = if val_set.is_empty() {
            f64::NAN
        } else {
            val_correct as f64 / val_set.len() as f64
        };
        metrics.push(EpochMetrics {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            train_accuracy: correct as f64 / train_set.len() as f64,
            val_accuracy,
        });
        if let Some(target) = config.stop_at_val_accuracy {
            if val_accuracy >= target {
                break;
            }
        }
    }
    Ok(metrics)
}

/// One SGD step on one sample. Returns (loss, predicted class).
fn train_step(
    net: &mut StyleNet,
    input: &Tensor<f32>,
    label: usize,
    config: &TrainConfig,
    state: &mut SgdMomentum<f32>,
) -> Result<(f64, usize), StyleError> {
    let layer_count = net.layers().len();
    debug_assert!(matches!(net.layers()[layer_count - 1], Layer::Softmax));

    // Forward through everything except the final softmax, keeping each
    // layer's input and any batch statistics.
    let mut activations: Vec<Tensor<f32>> = Vec::with_capacity(layer_count);
    let mut batch_stats = Vec::with_capacity(layer_count);
    let mut cur = input.clone();
    for layer in &net.layers()[..layer_count - 1] {
        activations.push(cur.clone());
        let (next, stats) = layer.forward_train(&cur)?;
        batch_stats.push(stats);
        cur = next;
    }
    let logits = cur;
    let (classes, _, positions) = logits.shape();

    // Per-position log-softmax loss with the shared label; the gradient of
    // the mean loss with respect to the logits is (softmax - onehot) / P.
    let mut grad = Tensor::zeros(classes, 1, positions);
    let mut loss = 0.0f64;
    let mut mean_probs = vec![0.0f64; classes];
    let scale = 1.0 / positions as f32;
    for p in 0..positions {
        let mut max = logits.get(0, 0, p);
        for c in 1..classes {
            max = max.max(logits.get(c, 0, p));
        }
        let mut sum = 0.0f32;
        for c in 0..classes {
            sum += (logits.get(c, 0, p) - max).exp();
        }
        let log_sum = sum.ln();
        loss -= f64::from(logits.get(label, 0, p) - max - log_sum) * f64::from(scale);
        for c in 0..classes {
            let prob = (logits.get(c, 0, p) - max).exp() / sum;
            mean_probs[c] += f64::from(prob);
            let target = if c == label { 1.0 } else { 0.0 };
            grad.set(c, 0, p, (prob - target) * scale);
        }
    }
    let predicted = mean_probs
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(&a.0)))
        .map(|(c, _)| c)
        .unwrap_or(0);

    // Backward through the trainable prefix.
    let mut param_grads: Vec<Vec<Vec<f32>>> = vec![Vec::new(); layer_count];
    let mut upstream = grad;
    for li in (0..layer_count - 1).rev() {
        let grads = net.layers()[li].backward(&activations[li], &upstream)?;
        upstream = grads.input_grad;
        param_grads[li] = grads.param_grads;
    }

    if config.grad_clip.is_finite() && config.grad_clip > 0.0 {
        let norm_sq: f32 = param_grads
            .iter()
            .flatten()
            .flatten()
            .map(|g| g * g)
            .sum();
        let norm = norm_sq.sqrt();
        if norm > config.grad_clip {
            let scale = config.grad_clip / norm;
            for g in param_grads.iter_mut().flatten().flatten() {
                *g *= scale;
            }
        }
    }

    sgd_step(net.layers_mut(), &param_grads, state).map_err(StyleError::Tensor)?;

    for (li, stats) in batch_stats.into_iter().enumerate() {
        if let (Layer::ChannelNorm(norm), Some(stats)) = (&mut net.layers_mut()[li], stats) {
            norm.update_running_stats(&stats, config.norm_momentum);
        }
    }

    Ok((loss, predicted))
}
