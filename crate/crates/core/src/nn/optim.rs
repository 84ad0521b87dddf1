use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::{Layer, LayerGrads};
use super::tensor::{Scalar, Tensor, TensorError};

/// SGD-with-momentum state: `v <- momentum * v + g`, `w <- w - lr * v`.
///
/// Velocity buffers are allocated lazily on the first step and must then
/// keep matching the layer stack they were created for.
#[derive(Debug, Clone)]
pub struct SgdMomentum<T> {
    pub learning_rate: T,
    pub momentum: T,
    pub step_count: u64,
    velocity: Vec<Vec<Vec<T>>>,
}

impl<T: Scalar> SgdMomentum<T> {
    pub fn new(learning_rate: T, momentum: T) -> Result<Self, TensorError> {
        if !learning_rate.is_finite() || learning_rate <= T::zero() {
            return Err(TensorError::NonFiniteInput);
        }
        if momentum < T::zero() || momentum >= T::one() {
            return Err(TensorError::LengthMismatch(format!(
                "momentum {momentum} outside [0, 1)"
            )));
        }
        Ok(SgdMomentum { learning_rate, momentum, step_count: 0, velocity: Vec::new() })
    }
}

/// Apply one SGD update to every parameter array of every layer.
///
/// `grads` holds one entry per layer, each with one gradient array per
/// parameter array in [`Layer::params`] order (empty for parameter-free
/// layers). Deterministic given identical inputs.
pub fn sgd_step<T: Scalar>(
    layers: &mut [Layer<T>],
    grads: &[Vec<Vec<T>>],
    state: &mut SgdMomentum<T>,
) -> Result<(), TensorError> {
    if grads.len() != layers.len() {
        return Err(TensorError::LengthMismatch(format!(
            "{} gradient sets for {} layers",
            grads.len(),
            layers.len()
        )));
    }
    if state.velocity.is_empty() {
        state.velocity = layers
            .iter()
            .map(|l| l.params().iter().map(|p| vec![T::zero(); p.len()]).collect())
            .collect();
    }
    for (li, layer) in layers.iter_mut().enumerate() {
        let params = layer.params_mut();
        if grads[li].len() != params.len() {
            return Err(TensorError::LengthMismatch(format!(
                "layer {li}: {} gradient arrays for {} parameter arrays",
                grads[li].len(),
                params.len()
            )));
        }
        for (pi, param) in params.into_iter().enumerate() {
            let grad = &grads[li][pi];
            if grad.len() != param.len() {
                return Err(TensorError::LengthMismatch(format!(
                    "layer {li} param {pi}: gradient length {} vs {}",
                    grad.len(),
                    param.len()
                )));
            }
            let velocity = &mut state.velocity[li][pi];
            for ((w, g), v) in param.iter_mut().zip(grad).zip(velocity.iter_mut()) {
                *v = state.momentum * *v + *g;
                *w = *w - state.learning_rate * *v;
            }
        }
    }
    state.step_count += 1;
    Ok(())
}

/// Scalar probe loss: the forward output contracted with a fixed cotangent.
fn probe_loss(layer: &Layer<f64>, input: &Tensor<f64>, cotangent: &[f64]) -> Result<f64, TensorError> {
    let (out, _) = layer.forward_train(input)?;
    Ok(out.data().iter().zip(cotangent).map(|(o, c)| o * c).sum())
}

/// Relative error with a unit floor, so near-zero gradients compare
/// absolutely instead of amplifying rounding noise.
fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1.0)
}

/// Compare [`Layer::backward`] against central finite differences over every
/// input element and every parameter, returning the maximum relative error.
///
/// Uses step 1e-5 in double precision and a fixed pseudo-random cotangent so
/// the check is deterministic.
pub fn gradient_check(layer: &Layer<f64>, input: &Tensor<f64>) -> Result<f64, TensorError> {
    const STEP: f64 = 1e-5;
    let (reference, _) = layer.forward_train(input)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x60AD_C8EC);
    let cotangent: Vec<f64> = (0..reference.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();

    let (oc, oh, ow) = reference.shape();
    let cot_tensor = Tensor::new(oc, oh, ow, cotangent.clone())?;
    let LayerGrads { input_grad, param_grads } = layer.backward(input, &cot_tensor)?;

    let mut max_err = 0.0f64;

    let mut probe_input = input.clone();
    for i in 0..input.len() {
        let original = probe_input.data()[i];
        probe_input.data_mut()[i] = original + STEP;
        let plus = probe_loss(layer, &probe_input, &cotangent)?;
        probe_input.data_mut()[i] = original - STEP;
        let minus = probe_loss(layer, &probe_input, &cotangent)?;
        probe_input.data_mut()[i] = original;
        let numeric = (plus - minus) / (2.0 * STEP);
        max_err = max_err.max(relative_error(input_grad.data()[i], numeric));
    }

    let mut probe_layer = layer.clone();
    let param_count = layer.params().len();
    for pi in 0..param_count {
        for i in 0..layer.params()[pi].len() {
            let original = probe_layer.params_mut()[pi][i];
            probe_layer.params_mut()[pi][i] = original + STEP;
            let plus = probe_loss(&probe_layer, input, &cotangent)?;
            probe_layer.params_mut()[pi][i] = original - STEP;
            let minus = probe_loss(&probe_layer, input, &cotangent)?;
            probe_layer.params_mut()[pi][i] = original;
            let numeric = (plus - minus) / (2.0 * STEP);
            max_err = max_err.max(relative_error(param_grads[pi][i], numeric));
        }
    }

    Ok(max_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layers::{ChannelNorm, Conv};

    fn conv_layer() -> Layer<f64> {
        Layer::Conv(Conv::new(1, 1, (2, 2), (1, 1), vec![0.5, -0.25, 0.75, 1.0], vec![0.2]).unwrap())
    }

    #[test]
    fn zero_gradients_leave_weights_unchanged() {
        let mut layers = vec![conv_layer()];
        let before = layers.clone();
        let grads = vec![vec![vec![0.0; 4], vec![0.0; 1]]];
        let mut state = SgdMomentum::new(0.1, 0.9).unwrap();
        sgd_step(&mut layers, &grads, &mut state).unwrap();
        assert_eq!(layers, before);
        assert_eq!(state.step_count, 1);
    }

    #[test]
    fn unit_lr_no_momentum_subtracts_gradient_exactly() {
        let mut layers = vec![conv_layer()];
        let grads = vec![vec![vec![0.1, 0.2, 0.3, 0.4], vec![1.0]]];
        let mut state = SgdMomentum::new(1.0, 0.0).unwrap();
        sgd_step(&mut layers, &grads, &mut state).unwrap();
        if let Layer::Conv(c) = &layers[0] {
            assert_eq!(c.weights, vec![0.4, -0.45, 0.45, 0.6]);
            assert_eq!(c.bias, vec![-0.8]);
        } else {
            unreachable!()
        }
    }

    #[test]
    fn two_momentum_steps_accumulate_velocity() {
        // Constant gradient g, lr 1, momentum 0.9: updates g then 1.9 g,
        // total 2.9 g.
        let mut layers = vec![conv_layer()];
        let start = if let Layer::Conv(c) = &layers[0] { c.weights.clone() } else { unreachable!() };
        let g = 0.5f64;
        let grads = vec![vec![vec![g; 4], vec![g]]];
        let mut state = SgdMomentum::new(1.0, 0.9).unwrap();
        sgd_step(&mut layers, &grads, &mut state).unwrap();
        sgd_step(&mut layers, &grads, &mut state).unwrap();
        if let Layer::Conv(c) = &layers[0] {
            for (w, w0) in c.weights.iter().zip(&start) {
                assert!((w - (w0 - 2.9 * g)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gradient_check_is_exact_for_linear_layers() {
        let layer = Layer::Conv(Conv::new(1, 1, (1, 1), (1, 1), vec![1.0], vec![0.0]).unwrap());
        let input = Tensor::from_fn(1, 4, 4, |_, y, x| 0.3 * y as f64 - 0.7 * x as f64 + 0.11);
        let err = gradient_check(&layer, &input).unwrap();
        assert!(err < 1e-9, "linear layer error {err}");
    }

    #[test]
    fn gradient_check_relu_away_from_zero() {
        let input = Tensor::from_fn(1, 4, 4, |_, y, x| {
            let v = (y * 4 + x) as f64 * 0.13 - 1.0;
            if v.abs() < 0.05 { v + 0.1 } else { v }
        });
        let err = gradient_check(&Layer::Relu, &input).unwrap();
        assert!(err < 1e-6, "relu error {err}");
    }

    #[test]
    fn gradient_check_channel_norm() {
        let mut norm = ChannelNorm::new(2);
        norm.gamma = vec![1.3, 0.8];
        norm.beta = vec![-0.2, 0.4];
        norm.running_mean = vec![0.1, -0.4];
        norm.running_var = vec![0.9, 2.3];
        let layer = Layer::ChannelNorm(norm);
        let input = Tensor::from_fn(2, 3, 3, |c, y, x| ((c * 31 + y * 7 + x * 3) % 11) as f64 * 0.21 - 1.0);
        let err = gradient_check(&layer, &input).unwrap();
        assert!(err < 1e-4, "channel norm error {err}");
    }

    #[test]
    fn invalid_hyperparameters_are_rejected() {
        assert!(SgdMomentum::<f64>::new(0.0, 0.5).is_err());
        assert!(SgdMomentum::<f64>::new(0.1, 1.0).is_err());
        assert!(SgdMomentum::<f64>::new(f64::NAN, 0.5).is_err());
    }
}
