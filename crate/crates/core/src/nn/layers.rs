use super::tensor::{scalar, Scalar, Tensor, TensorError};

/// Standard convolution over all input channels, "valid" padding.
///
/// Weights are stored row-major in (out, in, kh, kw) order, one bias per
/// output channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv<T> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Conv<T> {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        weights: Vec<T>,
        bias: Vec<T>,
    ) -> Result<Self, TensorError> {
        let expected = out_channels * in_channels * kernel.0 * kernel.1;
        if weights.len() != expected {
            return Err(TensorError::LengthMismatch(format!(
                "conv weights: expected {expected}, got {}",
                weights.len()
            )));
        }
        if bias.len() != out_channels {
            return Err(TensorError::LengthMismatch(format!(
                "conv bias: expected {out_channels}, got {}",
                bias.len()
            )));
        }
        if kernel.0 == 0 || kernel.1 == 0 || stride.0 == 0 || stride.1 == 0 {
            return Err(TensorError::ShapeMismatch("zero kernel or stride".into()));
        }
        Ok(Conv { in_channels, out_channels, kernel, stride, weights, bias })
    }

    #[inline]
    fn weight_base(&self, o: usize, i: usize, ky: usize) -> usize {
        ((o * self.in_channels + i) * self.kernel.0 + ky) * self.kernel.1
    }
}

/// Depthwise-separable convolution: a per-channel spatial (depthwise) pass
/// followed by a pointwise 1x1 mix-down. `depthwise` is (in, kh, kw)
/// row-major, `pointwise` is (out, in) row-major; the single bias applies to
/// the pointwise output.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthwiseSepConv<T> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    pub depthwise: Vec<T>,
    pub pointwise: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> DepthwiseSepConv<T> {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        depthwise: Vec<T>,
        pointwise: Vec<T>,
        bias: Vec<T>,
    ) -> Result<Self, TensorError> {
        if depthwise.len() != in_channels * kernel.0 * kernel.1 {
            return Err(TensorError::LengthMismatch(format!(
                "depthwise weights: expected {}, got {}",
                in_channels * kernel.0 * kernel.1,
                depthwise.len()
            )));
        }
        if pointwise.len() != out_channels * in_channels {
            return Err(TensorError::LengthMismatch(format!(
                "pointwise weights: expected {}, got {}",
                out_channels * in_channels,
                pointwise.len()
            )));
        }
        if bias.len() != out_channels {
            return Err(TensorError::LengthMismatch(format!(
                "bias: expected {out_channels}, got {}",
                bias.len()
            )));
        }
        if kernel.0 == 0 || kernel.1 == 0 || stride.0 == 0 || stride.1 == 0 {
            return Err(TensorError::ShapeMismatch("zero kernel or stride".into()));
        }
        Ok(DepthwiseSepConv { in_channels, out_channels, kernel, stride, depthwise, pointwise, bias })
    }

    /// Depthwise stage only; shared by forward and backward.
    fn depthwise_pass(&self, input: &Tensor<T>) -> Tensor<T> {
        let (c_in, h, w) = input.shape();
        let (kh, kw) = self.kernel;
        let (sh, sw) = self.stride;
        let oh = (h - kh) / sh + 1;
        let ow = (w - kw) / sw + 1;
        let mut mid = Tensor::zeros(c_in, oh, ow);
        for c in 0..c_in {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = T::zero();
                    for ky in 0..kh {
                        let row = &input.row(c, oy * sh + ky)[ox * sw..ox * sw + kw];
                        let wbase = (c * kh + ky) * kw;
                        let taps = &self.depthwise[wbase..wbase + kw];
                        for (t, v) in taps.iter().zip(row) {
                            acc = acc + *t * *v;
                        }
                    }
                    mid.set(c, oy, ox, acc);
                }
            }
        }
        mid
    }
}

/// Spatial max pooling, "valid" windows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaxPool {
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
}

impl MaxPool {
    /// The 2x2 stride-2 pooling used throughout the style network.
    pub fn new_2x2() -> Self {
        MaxPool { kernel: (2, 2), stride: (2, 2) }
    }
}

/// Per-channel affine normalization with stored running statistics.
///
/// Normalization always uses the stored statistics, making the layer a
/// per-channel affine map at every phase. Training passes additionally
/// report the input's per-channel statistics so the trainer can fold them
/// into the running values; normalizing with per-input statistics instead
/// would erase constant inputs entirely (their spatial variance is zero).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelNorm<T> {
    pub channels: usize,
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    pub epsilon: T,
}

impl<T: Scalar> ChannelNorm<T> {
    pub fn new(channels: usize) -> Self {
        ChannelNorm {
            channels,
            gamma: vec![T::one(); channels],
            beta: vec![T::zero(); channels],
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
            epsilon: scalar(1e-5),
        }
    }

    /// Per-channel mean and (population) variance of a single input.
    pub fn batch_stats(&self, input: &Tensor<T>) -> NormBatchStats<T> {
        let (c_n, h, w) = input.shape();
        let n = scalar::<T>((h * w) as f64);
        let mut mean = Vec::with_capacity(c_n);
        let mut var = Vec::with_capacity(c_n);
        for c in 0..c_n {
            let mut sum = T::zero();
            for y in 0..h {
                for v in input.row(c, y) {
                    sum = sum + *v;
                }
            }
            let m = sum / n;
            let mut sq = T::zero();
            for y in 0..h {
                for v in input.row(c, y) {
                    let d = *v - m;
                    sq = sq + d * d;
                }
            }
            mean.push(m);
            var.push(sq / n);
        }
        NormBatchStats { mean, var }
    }

    /// Fold batch statistics into the running statistics.
    ///
    /// The mean and the second moment are averaged exponentially and the
    /// running variance derived from them, so it tracks the population
    /// variance of all observed activations. Averaging per-input variances
    /// directly would miss between-input variance and collapse to zero on
    /// constant inputs.
    pub fn update_running_stats(&mut self, stats: &NormBatchStats<T>, momentum: T) {
        let keep = T::one() - momentum;
        for c in 0..self.channels {
            let old_mean = self.running_mean[c];
            let old_m2 = self.running_var[c] + old_mean * old_mean;
            let sample_m2 = stats.var[c] + stats.mean[c] * stats.mean[c];
            let new_mean = keep * old_mean + momentum * stats.mean[c];
            let new_m2 = keep * old_m2 + momentum * sample_m2;
            self.running_mean[c] = new_mean;
            self.running_var[c] = (new_m2 - new_mean * new_mean).max(T::zero());
        }
    }

    fn normalize(&self, input: &Tensor<T>, mean: &[T], var: &[T]) -> Tensor<T> {
        let (c_n, h, w) = input.shape();
        let mut out = Tensor::zeros(c_n, h, w);
        for c in 0..c_n {
            let inv_std = T::one() / (var[c] + self.epsilon).sqrt();
            let g = self.gamma[c];
            let b = self.beta[c];
            let m = mean[c];
            for y in 0..h {
                for x in 0..w {
                    out.set(c, y, x, g * (input.get(c, y, x) - m) * inv_std + b);
                }
            }
        }
        out
    }
}

/// Per-channel statistics produced by a training-mode normalization pass.
#[derive(Debug, Clone, PartialEq)]
pub struct NormBatchStats<T> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
}

/// One layer of the network. All spatial operators use "valid" padding.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer<T> {
    Conv(Conv<T>),
    DepthwiseSepConv(DepthwiseSepConv<T>),
    MaxPool(MaxPool),
    ChannelNorm(ChannelNorm<T>),
    Relu,
    /// Softmax across channels, independently at every spatial position.
    Softmax,
}

/// Gradients produced by one backward step: the gradient with respect to the
/// layer input plus one gradient array per parameter array, in the same
/// order as [`Layer::params`].
#[derive(Debug, Clone)]
pub struct LayerGrads<T> {
    pub input_grad: Tensor<T>,
    pub param_grads: Vec<Vec<T>>,
}

impl<T: Scalar> Layer<T> {
    /// Output shape of this layer for the given input shape, following the
    /// valid-convolution law `out = floor((in - k) / stride) + 1`.
    pub fn output_shape(&self, input: (usize, usize, usize)) -> Result<(usize, usize, usize), TensorError> {
        let (c, h, w) = input;
        let spatial = |kernel: (usize, usize), stride: (usize, usize)| -> Result<(usize, usize), TensorError> {
            if h < kernel.0 || w < kernel.1 {
                return Err(TensorError::ShapeMismatch(format!(
                    "input {h}x{w} smaller than kernel {}x{}",
                    kernel.0, kernel.1
                )));
            }
            Ok(((h - kernel.0) / stride.0 + 1, (w - kernel.1) / stride.1 + 1))
        };
        match self {
            Layer::Conv(l) => {
                if c != l.in_channels {
                    return Err(TensorError::ShapeMismatch(format!(
                        "conv expects {} input channels, got {c}",
                        l.in_channels
                    )));
                }
                let (oh, ow) = spatial(l.kernel, l.stride)?;
                Ok((l.out_channels, oh, ow))
            }
            Layer::DepthwiseSepConv(l) => {
                if c != l.in_channels {
                    return Err(TensorError::ShapeMismatch(format!(
                        "separable conv expects {} input channels, got {c}",
                        l.in_channels
                    )));
                }
                let (oh, ow) = spatial(l.kernel, l.stride)?;
                Ok((l.out_channels, oh, ow))
            }
            Layer::MaxPool(l) => {
                let (oh, ow) = spatial(l.kernel, l.stride)?;
                Ok((c, oh, ow))
            }
            Layer::ChannelNorm(l) => {
                if c != l.channels {
                    return Err(TensorError::ShapeMismatch(format!(
                        "normalization expects {} channels, got {c}",
                        l.channels
                    )));
                }
                Ok(input)
            }
            Layer::Relu | Layer::Softmax => Ok(input),
        }
    }

    /// Inference-mode forward pass. Normalization uses stored statistics.
    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
        if !input.all_finite() {
            return Err(TensorError::NonFiniteInput);
        }
        self.output_shape(input.shape())?;
        Ok(match self {
            Layer::Conv(l) => conv_forward(l, input),
            Layer::DepthwiseSepConv(l) => sep_conv_forward(l, input),
            Layer::MaxPool(l) => maxpool_forward(l, input),
            Layer::ChannelNorm(l) => l.normalize(input, &l.running_mean, &l.running_var),
            Layer::Relu => relu_forward(input),
            Layer::Softmax => softmax_forward(input),
        })
    }

    /// Training-mode forward pass. Computes the same map as
    /// [`Layer::forward`]; normalization layers additionally return the
    /// input's batch statistics for the caller to fold into the running
    /// statistics.
    pub fn forward_train(&self, input: &Tensor<T>) -> Result<(Tensor<T>, Option<NormBatchStats<T>>), TensorError> {
        let out = self.forward(input)?;
        let stats = match self {
            Layer::ChannelNorm(l) => Some(l.batch_stats(input)),
            _ => None,
        };
        Ok((out, stats))
    }

    /// Exact analytic gradients of the training-mode forward map.
    ///
    /// `output_grad` must have the forward output's shape. Max pooling
    /// routes each gradient to the first maximal element of its window in
    /// row-major scan order.
    pub fn backward(&self, input: &Tensor<T>, output_grad: &Tensor<T>) -> Result<LayerGrads<T>, TensorError> {
        let expected = self.output_shape(input.shape())?;
        if output_grad.shape() != expected {
            return Err(TensorError::ShapeMismatch(format!(
                "output gradient shape {:?} does not match forward output {:?}",
                output_grad.shape(),
                expected
            )));
        }
        Ok(match self {
            Layer::Conv(l) => conv_backward(l, input, output_grad),
            Layer::DepthwiseSepConv(l) => sep_conv_backward(l, input, output_grad),
            Layer::MaxPool(l) => maxpool_backward(l, input, output_grad),
            Layer::ChannelNorm(l) => channel_norm_backward(l, input, output_grad),
            Layer::Relu => relu_backward(input, output_grad),
            Layer::Softmax => softmax_backward(input, output_grad),
        })
    }

    /// Trainable parameter arrays. Order per kind: Conv -> [weights, bias];
    /// DepthwiseSepConv -> [depthwise, pointwise, bias]; ChannelNorm ->
    /// [gamma, beta]; others have none. Running statistics are buffers, not
    /// parameters.
    pub fn params(&self) -> Vec<&[T]> {
        match self {
            Layer::Conv(l) => vec![&l.weights, &l.bias],
            Layer::DepthwiseSepConv(l) => vec![&l.depthwise, &l.pointwise, &l.bias],
            Layer::ChannelNorm(l) => vec![&l.gamma, &l.beta],
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Vec<T>> {
        match self {
            Layer::Conv(l) => vec![&mut l.weights, &mut l.bias],
            Layer::DepthwiseSepConv(l) => vec![&mut l.depthwise, &mut l.pointwise, &mut l.bias],
            Layer::ChannelNorm(l) => vec![&mut l.gamma, &mut l.beta],
            _ => Vec::new(),
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}

fn conv_forward<T: Scalar>(l: &Conv<T>, input: &Tensor<T>) -> Tensor<T> {
    let (_, h, w) = input.shape();
    let (kh, kw) = l.kernel;
    let (sh, sw) = l.stride;
    let oh = (h - kh) / sh + 1;
    let ow = (w - kw) / sw + 1;
    let mut out = Tensor::zeros(l.out_channels, oh, ow);
    for o in 0..l.out_channels {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = l.bias[o];
                for i in 0..l.in_channels {
                    for ky in 0..kh {
                        let row = &input.row(i, oy * sh + ky)[ox * sw..ox * sw + kw];
                        let wbase = l.weight_base(o, i, ky);
                        let taps = &l.weights[wbase..wbase + kw];
                        for (t, v) in taps.iter().zip(row) {
                            acc = acc + *t * *v;
                        }
                    }
                }
                out.set(o, oy, ox, acc);
            }
        }
    }
    out
}

fn conv_backward<T: Scalar>(l: &Conv<T>, input: &Tensor<T>, output_grad: &Tensor<T>) -> LayerGrads<T> {
    let (c_in, h, w) = input.shape();
    let (_, oh, ow) = output_grad.shape();
    let (kh, kw) = l.kernel;
    let (sh, sw) = l.stride;
    let mut input_grad = Tensor::zeros(c_in, h, w);
    let mut weight_grad = vec![T::zero(); l.weights.len()];
    let mut bias_grad = vec![T::zero(); l.bias.len()];
    for o in 0..l.out_channels {
        for oy in 0..oh {
            for ox in 0..ow {
                let g = output_grad.get(o, oy, ox);
                bias_grad[o] = bias_grad[o] + g;
                for i in 0..c_in {
                    for ky in 0..kh {
                        let in_base = (i * h + oy * sh + ky) * w + ox * sw;
                        let wbase = l.weight_base(o, i, ky);
                        let in_row = &input.data()[in_base..in_base + kw];
                        let taps = &l.weights[wbase..wbase + kw];
                        let wg = &mut weight_grad[wbase..wbase + kw];
                        let ig = &mut input_grad.data_mut()[in_base..in_base + kw];
                        for kx in 0..kw {
                            wg[kx] = wg[kx] + g * in_row[kx];
                            ig[kx] = ig[kx] + g * taps[kx];
                        }
                    }
                }
            }
        }
    }
    LayerGrads { input_grad, param_grads: vec![weight_grad, bias_grad] }
}

fn sep_conv_forward<T: Scalar>(l: &DepthwiseSepConv<T>, input: &Tensor<T>) -> Tensor<T> {
    let mid = l.depthwise_pass(input);
    let (c_in, oh, ow) = mid.shape();
    let plane = oh * ow;
    let mut out = Tensor::zeros(l.out_channels, oh, ow);
    for o in 0..l.out_channels {
        let out_plane = &mut out.data_mut()[o * plane..(o + 1) * plane];
        out_plane.fill(l.bias[o]);
        for i in 0..c_in {
            let coeff = l.pointwise[o * c_in + i];
            let mid_plane = &mid.data()[i * plane..(i + 1) * plane];
            for (ov, mv) in out_plane.iter_mut().zip(mid_plane) {
                *ov = *ov + coeff * *mv;
            }
        }
    }
    out
}

fn sep_conv_backward<T: Scalar>(
    l: &DepthwiseSepConv<T>,
    input: &Tensor<T>,
    output_grad: &Tensor<T>,
) -> LayerGrads<T> {
    let (c_in, h, w) = input.shape();
    let (kh, kw) = l.kernel;
    let (sh, sw) = l.stride;
    let mid = l.depthwise_pass(input);
    let (_, oh, ow) = mid.shape();

    // Pointwise stage.
    let plane = oh * ow;
    let mut mid_grad: Tensor<T> = Tensor::zeros(c_in, oh, ow);
    let mut pointwise_grad = vec![T::zero(); l.pointwise.len()];
    let mut bias_grad = vec![T::zero(); l.bias.len()];
    for o in 0..l.out_channels {
        let gout_plane = &output_grad.data()[o * plane..(o + 1) * plane];
        for g in gout_plane {
            bias_grad[o] = bias_grad[o] + *g;
        }
        for i in 0..c_in {
            let coeff = l.pointwise[o * c_in + i];
            let mid_plane = &mid.data()[i * plane..(i + 1) * plane];
            let mg_plane = &mut mid_grad.data_mut()[i * plane..(i + 1) * plane];
            let mut dot = T::zero();
            for ((g, mv), mg) in gout_plane.iter().zip(mid_plane).zip(mg_plane.iter_mut()) {
                dot = dot + *g * *mv;
                *mg = *mg + *g * coeff;
            }
            pointwise_grad[o * c_in + i] = pointwise_grad[o * c_in + i] + dot;
        }
    }

    // Depthwise stage.
    let mut input_grad = Tensor::zeros(c_in, h, w);
    let mut depthwise_grad = vec![T::zero(); l.depthwise.len()];
    for c in 0..c_in {
        for oy in 0..oh {
            for ox in 0..ow {
                let g = mid_grad.get(c, oy, ox);
                for ky in 0..kh {
                    let in_base = (c * h + oy * sh + ky) * w + ox * sw;
                    let wbase = (c * kh + ky) * kw;
                    let in_row = &input.data()[in_base..in_base + kw];
                    let taps = &l.depthwise[wbase..wbase + kw];
                    let dg = &mut depthwise_grad[wbase..wbase + kw];
                    let ig = &mut input_grad.data_mut()[in_base..in_base + kw];
                    for kx in 0..kw {
                        dg[kx] = dg[kx] + g * in_row[kx];
                        ig[kx] = ig[kx] + g * taps[kx];
                    }
                }
            }
        }
    }

    LayerGrads { input_grad, param_grads: vec![depthwise_grad, pointwise_grad, bias_grad] }
}

fn maxpool_forward<T: Scalar>(l: &MaxPool, input: &Tensor<T>) -> Tensor<T> {
    let (c_n, h, w) = input.shape();
    let (kh, kw) = l.kernel;
    let (sh, sw) = l.stride;
    let oh = (h - kh) / sh + 1;
    let ow = (w - kw) / sw + 1;
    let mut out = Tensor::zeros(c_n, oh, ow);
    for c in 0..c_n {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = input.get(c, oy * sh, ox * sw);
                for ky in 0..kh {
                    let row = input.row(c, oy * sh + ky);
                    for kx in 0..kw {
                        let v = row[ox * sw + kx];
                        if v > best {
                            best = v;
                        }
                    }
                }
                out.set(c, oy, ox, best);
            }
        }
    }
    out
}

fn maxpool_backward<T: Scalar>(l: &MaxPool, input: &Tensor<T>, output_grad: &Tensor<T>) -> LayerGrads<T> {
    let (c_n, h, w) = input.shape();
    let (_, oh, ow) = output_grad.shape();
    let (kh, kw) = l.kernel;
    let (sh, sw) = l.stride;
    let mut input_grad = Tensor::zeros(c_n, h, w);
    for c in 0..c_n {
        for oy in 0..oh {
            for ox in 0..ow {
                // First maximal element in row-major scan order wins ties.
                let mut best = input.get(c, oy * sh, ox * sw);
                let mut best_pos = (oy * sh, ox * sw);
                for ky in 0..kh {
                    let iy = oy * sh + ky;
                    let row = input.row(c, iy);
                    for kx in 0..kw {
                        let ix = ox * sw + kx;
                        if row[ix] > best {
                            best = row[ix];
                            best_pos = (iy, ix);
                        }
                    }
                }
                let g = input_grad.get(c, best_pos.0, best_pos.1) + output_grad.get(c, oy, ox);
                input_grad.set(c, best_pos.0, best_pos.1, g);
            }
        }
    }
    LayerGrads { input_grad, param_grads: Vec::new() }
}

fn channel_norm_backward<T: Scalar>(
    l: &ChannelNorm<T>,
    input: &Tensor<T>,
    output_grad: &Tensor<T>,
) -> LayerGrads<T> {
    let (c_n, h, w) = input.shape();
    let mut input_grad = Tensor::zeros(c_n, h, w);
    let mut gamma_grad = vec![T::zero(); c_n];
    let mut beta_grad = vec![T::zero(); c_n];
    for c in 0..c_n {
        let inv_std = T::one() / (l.running_var[c] + l.epsilon).sqrt();
        let m = l.running_mean[c];
        let g = l.gamma[c];
        for y in 0..h {
            for x in 0..w {
                let dy = output_grad.get(c, y, x);
                let xhat = (input.get(c, y, x) - m) * inv_std;
                gamma_grad[c] = gamma_grad[c] + dy * xhat;
                beta_grad[c] = beta_grad[c] + dy;
                input_grad.set(c, y, x, dy * g * inv_std);
            }
        }
    }
    LayerGrads { input_grad, param_grads: vec![gamma_grad, beta_grad] }
}

fn relu_forward<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    let (c, h, w) = input.shape();
    let data = input.data().iter().map(|&v| if v > T::zero() { v } else { T::zero() }).collect();
    Tensor::new(c, h, w, data).expect("same shape")
}

fn relu_backward<T: Scalar>(input: &Tensor<T>, output_grad: &Tensor<T>) -> LayerGrads<T> {
    let (c, h, w) = input.shape();
    let data = input
        .data()
        .iter()
        .zip(output_grad.data())
        .map(|(&x, &g)| if x > T::zero() { g } else { T::zero() })
        .collect();
    LayerGrads {
        input_grad: Tensor::new(c, h, w, data).expect("same shape"),
        param_grads: Vec::new(),
    }
}

/// Softmax over channels at a single spatial position, max-subtracted.
fn softmax_at<T: Scalar>(input: &Tensor<T>, y: usize, x: usize) -> Vec<T> {
    let (c_n, _, _) = input.shape();
    let mut max = input.get(0, y, x);
    for c in 1..c_n {
        let v = input.get(c, y, x);
        if v > max {
            max = v;
        }
    }
    let mut exps: Vec<T> = (0..c_n).map(|c| (input.get(c, y, x) - max).exp()).collect();
    let mut sum = T::zero();
    for e in &exps {
        sum = sum + *e;
    }
    for e in &mut exps {
        *e = *e / sum;
    }
    exps
}

fn softmax_forward<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    let (c_n, h, w) = input.shape();
    let mut out = Tensor::zeros(c_n, h, w);
    for y in 0..h {
        for x in 0..w {
            for (c, p) in softmax_at(input, y, x).into_iter().enumerate() {
                out.set(c, y, x, p);
            }
        }
    }
    out
}

fn softmax_backward<T: Scalar>(input: &Tensor<T>, output_grad: &Tensor<T>) -> LayerGrads<T> {
    let (c_n, h, w) = input.shape();
    let mut input_grad = Tensor::zeros(c_n, h, w);
    for y in 0..h {
        for x in 0..w {
            let probs = softmax_at(input, y, x);
            let mut dot = T::zero();
            for c in 0..c_n {
                dot = dot + output_grad.get(c, y, x) * probs[c];
            }
            for c in 0..c_n {
                input_grad.set(c, y, x, probs[c] * (output_grad.get(c, y, x) - dot));
            }
        }
    }
    LayerGrads { input_grad, param_grads: Vec::new() }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_conv_1x1() -> Layer<f64> {
        Layer::Conv(Conv::new(1, 1, (1, 1), (1, 1), vec![1.0], vec![0.0]).unwrap())
    }

    #[test]
    fn identity_conv_passes_input_through() {
        let t = Tensor::from_fn(1, 3, 4, |_, y, x| (y * 4 + x) as f64 * 0.5 - 2.0);
        let out = identity_conv_1x1().forward(&t).unwrap();
        assert_eq!(out, t);
    }

    #[test]
    fn conv_on_zero_input_outputs_bias() {
        let layer = Layer::Conv(Conv::new(1, 2, (3, 3), (1, 1), vec![0.7; 18], vec![1.5, -2.0]).unwrap());
        let out = layer.forward(&Tensor::<f64>::zeros(1, 5, 5)).unwrap();
        for y in 0..3 {
            for x in 0..3 {
                assert_eq!(out.get(0, y, x), 1.5);
                assert_eq!(out.get(1, y, x), -2.0);
            }
        }
    }

    #[test]
    fn ones_kernel_sums_the_window() {
        // 3x3 input 1..9, all-ones 3x3 kernel, zero bias: single output 45.
        let input = Tensor::new(1, 3, 3, (1..=9).map(f64::from).collect()).unwrap();
        let layer = Layer::Conv(Conv::new(1, 1, (3, 3), (1, 1), vec![1.0; 9], vec![0.0]).unwrap());
        let out = layer.forward(&input).unwrap();
        assert_eq!(out.shape(), (1, 1, 1));
        assert_eq!(out.get(0, 0, 0), 45.0);
    }

    #[test]
    fn softmax_of_equal_logits_is_uniform() {
        let input = Tensor::<f64>::zeros(2, 1, 1);
        let out = Layer::Softmax.forward(&input).unwrap();
        assert_eq!(out.get(0, 0, 0), 0.5);
        assert_eq!(out.get(1, 0, 0), 0.5);
    }

    #[test]
    fn identity_conv_backward_passes_gradient_through() {
        let t = Tensor::from_fn(1, 3, 3, |_, y, x| (y + x) as f64);
        let gout = Tensor::from_fn(1, 3, 3, |_, y, x| (y * 3 + x) as f64 - 4.0);
        let grads = identity_conv_1x1().backward(&t, &gout).unwrap();
        assert_eq!(grads.input_grad, gout);
    }

    #[test]
    fn zero_output_grad_gives_zero_gradients() {
        let layer = Layer::Conv(Conv::new(1, 1, (2, 2), (1, 1), vec![0.3, -0.1, 0.2, 0.9], vec![0.1]).unwrap());
        let input = Tensor::from_fn(1, 4, 4, |_, y, x| (y * 4 + x) as f64);
        let grads = layer.backward(&input, &Tensor::zeros(1, 3, 3)).unwrap();
        assert!(grads.input_grad.data().iter().all(|&g| g == 0.0));
        assert!(grads.param_grads.iter().flatten().all(|&g| g == 0.0));
    }

    #[test]
    fn maxpool_ties_route_to_first_in_scan_order() {
        let input = Tensor::new(1, 2, 2, vec![3.0, 3.0, 3.0, 3.0]).unwrap();
        let layer = Layer::MaxPool(MaxPool::new_2x2());
        let grads = layer.backward(&input, &Tensor::filled(1, 1, 1, 2.0)).unwrap();
        assert_eq!(grads.input_grad.data(), &[2.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let mut t = Tensor::<f64>::zeros(1, 2, 2);
        t.data_mut()[1] = f64::NAN;
        assert_eq!(identity_conv_1x1().forward(&t), Err(TensorError::NonFiniteInput));
    }

    #[test]
    fn channel_mismatch_is_rejected() {
        let layer = Layer::Conv(Conv::new(2, 1, (1, 1), (1, 1), vec![1.0, 1.0], vec![0.0]).unwrap());
        assert!(matches!(
            layer.forward(&Tensor::<f64>::zeros(1, 2, 2)),
            Err(TensorError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn depthwise_delta_with_identity_pointwise_is_identity() {
        // Depthwise kernel = discrete delta, pointwise = identity matrix.
        let c = 3;
        let (kh, kw) = (3, 3);
        let mut depthwise = vec![0.0; c * kh * kw];
        for ch in 0..c {
            depthwise[(ch * kh + 1) * kw + 1] = 1.0; // center tap
        }
        let mut pointwise = vec![0.0; c * c];
        for ch in 0..c {
            pointwise[ch * c + ch] = 1.0;
        }
        let layer = Layer::DepthwiseSepConv(
            DepthwiseSepConv::new(c, c, (kh, kw), (1, 1), depthwise, pointwise, vec![0.0; c]).unwrap(),
        );
        let input = Tensor::from_fn(c, 5, 6, |ch, y, x| (ch * 100 + y * 10 + x) as f64 * 0.01);
        let out = layer.forward(&input).unwrap();
        // Valid padding trims a 1-pixel border; the interior must match.
        assert_eq!(out.shape(), (c, 3, 4));
        for ch in 0..c {
            for y in 0..3 {
                for x in 0..4 {
                    assert_eq!(out.get(ch, y, x), input.get(ch, y + 1, x + 1));
                }
            }
        }
    }
}
