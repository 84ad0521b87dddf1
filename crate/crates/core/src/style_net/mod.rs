//! The font-style classifier: a small fully convolutional network whose
//! output positions are 50x50 input patches taken at stride 4, so a single
//! forward pass classifies every patch of a variable-width text crop at
//! once.
//!
//! The stack is constrained rather than fixed: exactly two 2x2 stride-2 max
//! pools (output stride 4), a composed receptive field of exactly 50x50, and
//! a final convolution followed by a channel softmax. [`StyleNet::toy`]
//! builds the default stack satisfying those constraints.

mod format;
mod train;

use std::fmt;
use std::io;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::image::{resize_bilinear, ImageBuffer};
use crate::nn::{ChannelNorm, Conv, DepthwiseSepConv, Layer, MaxPool, Tensor, TensorError};

pub use format::{FORMAT_MAGIC, FORMAT_VERSION};
pub use train::{train, EpochMetrics, TrainConfig};

/// Inputs are grayscale, exactly this many pixels high.
pub const INPUT_HEIGHT: usize = 50;
/// Narrower inputs are right-padded up to the receptive field width.
pub const MIN_WIDTH: usize = 50;
/// Wider images are rescaled down to cap inference cost.
pub const MAX_WIDTH: usize = 80;
/// Each output position classifies one input window of this size.
pub const RECEPTIVE_FIELD: usize = 50;
/// Input-pixel spacing between adjacent output positions (two 2x pools).
pub const OUTPUT_STRIDE: usize = 4;

#[derive(Debug)]
pub enum StyleError {
    EmptyImage,
    /// Input tensor violates the height/width/channel contract.
    BadInput(String),
    Tensor(TensorError),
    EmptyDataset,
    SingleClassDataset,
    LabelOutOfRange { label: usize, classes: usize },
    TrainingDiverged { epoch: usize },
    /// Layer stack violates a structural constraint.
    BadModel(String),
    Io(io::Error),
    BadMagic,
    FormatVersionMismatch { found: u32 },
    ChecksumMismatch,
    Corrupt(String),
}

impl fmt::Display for StyleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StyleError::EmptyImage => write!(f, "empty image"),
            StyleError::BadInput(msg) => write!(f, "bad input: {msg}"),
            StyleError::Tensor(e) => write!(f, "{e}"),
            StyleError::EmptyDataset => write!(f, "empty dataset"),
            StyleError::SingleClassDataset => write!(f, "dataset must contain at least 2 classes"),
            StyleError::LabelOutOfRange { label, classes } => {
                write!(f, "label {label} out of range for {classes} classes")
            }
            StyleError::TrainingDiverged { epoch } => {
                write!(f, "training diverged (non-finite loss) in epoch {epoch}")
            }
            StyleError::BadModel(msg) => write!(f, "bad model: {msg}"),
            StyleError::Io(e) => write!(f, "i/o error: {e}"),
            StyleError::BadMagic => write!(f, "not a model file (bad magic)"),
            StyleError::FormatVersionMismatch { found } => {
                write!(f, "unsupported model format version {found} (expected {FORMAT_VERSION})")
            }
            StyleError::ChecksumMismatch => write!(f, "model file corrupt (checksum mismatch)"),
            StyleError::Corrupt(msg) => write!(f, "model file corrupt: {msg}"),
        }
    }
}

impl std::error::Error for StyleError {}

impl From<TensorError> for StyleError {
    fn from(e: TensorError) -> Self {
        StyleError::Tensor(e)
    }
}

impl From<io::Error> for StyleError {
    fn from(e: io::Error) -> Self {
        StyleError::Io(e)
    }
}

/// Structural facts about a validated model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelSummary {
    pub class_count: usize,
    pub receptive_field: (usize, usize),
    pub output_stride: (usize, usize),
    pub maxpool_count: usize,
    pub parameter_count: usize,
}

/// One entry of a ranked classification.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedClass {
    pub index: usize,
    pub label: String,
    pub confidence: f32,
}

/// Output of [`StyleNet::infer`].
#[derive(Debug, Clone)]
pub struct StyleResult {
    /// One probability row per 50x50 patch position (stride 4).
    pub per_patch: Vec<Vec<f32>>,
    /// Arithmetic mean of the per-patch probability rows.
    pub aggregated: Vec<f32>,
    /// Classes by descending aggregated confidence, ties by class index.
    pub ranked: Vec<RankedClass>,
}

/// The font-style network: an immutable layer stack plus class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct StyleNet {
    layers: Vec<Layer<f32>>,
    labels: Vec<String>,
}

impl StyleNet {
    /// Validate and wrap a layer stack.
    pub fn from_layers(layers: Vec<Layer<f32>>, labels: Vec<String>) -> Result<Self, StyleError> {
        validate_stack(&layers, labels.len())?;
        Ok(StyleNet { layers, labels })
    }

    /// Default stack: Conv 7x7x16, norm, relu, pool, separable 5x5x32, norm,
    /// relu, pool, Conv 9x9xC, softmax. Receptive field composes to exactly
    /// 50x50 at output stride 4. He-uniform initialization from `seed`.
    pub fn toy(labels: Vec<String>, seed: u64) -> Result<Self, StyleError> {
        if labels.is_empty() {
            return Err(StyleError::BadModel("no class labels".into()));
        }
        let classes = labels.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut he = |fan_in: usize, n: usize| -> Vec<f32> {
            let limit = (6.0 / fan_in as f64).sqrt();
            (0..n).map(|_| rng.gen_range(-limit..limit) as f32).collect()
        };

        let conv1 = Conv::new(1, 16, (7, 7), (1, 1), he(49, 16 * 49), vec![0.0; 16])?;
        let sep = DepthwiseSepConv::new(
            16,
            32,
            (5, 5),
            (1, 1),
            he(25, 16 * 25),
            he(16, 32 * 16),
            vec![0.0; 32],
        )?;
        let head = Conv::new(32, classes, (9, 9), (1, 1), he(32 * 81, classes * 32 * 81), vec![0.0; classes])?;

        let layers = vec![
            Layer::Conv(conv1),
            Layer::ChannelNorm(ChannelNorm::new(16)),
            Layer::Relu,
            Layer::MaxPool(MaxPool::new_2x2()),
            Layer::DepthwiseSepConv(sep),
            Layer::ChannelNorm(ChannelNorm::new(32)),
            Layer::Relu,
            Layer::MaxPool(MaxPool::new_2x2()),
            Layer::Conv(head),
            Layer::Softmax,
        ];
        Self::from_layers(layers, labels)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.labels.len()
    }

    pub fn layers(&self) -> &[Layer<f32>] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer<f32>] {
        &mut self.layers
    }

    pub fn summary(&self) -> ModelSummary {
        let (rf, stride, pools) = stack_geometry(&self.layers);
        ModelSummary {
            class_count: self.labels.len(),
            receptive_field: rf,
            output_stride: stride,
            maxpool_count: pools,
            parameter_count: self.layers.iter().map(Layer::parameter_count).sum(),
        }
    }

    /// Number of 50x50 patch positions in a width-`w` input:
    /// `floor((w - 50) / 4) + 1`.
    pub fn patch_count(width: usize) -> usize {
        (width - RECEPTIVE_FIELD) / OUTPUT_STRIDE + 1
    }

    fn check_input(input: &Tensor<f32>) -> Result<(), StyleError> {
        let (c, h, w) = input.shape();
        if c != 1 || h != INPUT_HEIGHT || !(MIN_WIDTH..=MAX_WIDTH).contains(&w) {
            return Err(StyleError::BadInput(format!(
                "expected 1x{INPUT_HEIGHT}x[{MIN_WIDTH}..{MAX_WIDTH}] input, got {c}x{h}x{w}"
            )));
        }
        Ok(())
    }

    /// Inference-mode forward pass through the whole stack.
    fn forward(&self, input: &Tensor<f32>) -> Result<Tensor<f32>, StyleError> {
        let mut cur = input.clone();
        for layer in &self.layers {
            cur = layer.forward(&cur)?;
        }
        Ok(cur)
    }

    /// Classify every 50x50 patch of the input in one forward pass and
    /// aggregate the per-patch probabilities by arithmetic mean.
    pub fn infer(&self, input: &Tensor<f32>) -> Result<StyleResult, StyleError> {
        Self::check_input(input)?;
        let out = self.forward(input)?;
        let (classes, oh, positions) = out.shape();
        debug_assert_eq!(oh, 1);
        debug_assert_eq!(positions, Self::patch_count(input.width()));

        let per_patch: Vec<Vec<f32>> = (0..positions)
            .map(|p| (0..classes).map(|c| out.get(c, 0, p)).collect())
            .collect();
        let mut aggregated = vec![0.0f32; classes];
        for row in &per_patch {
            for (a, v) in aggregated.iter_mut().zip(row) {
                *a += v;
            }
        }
        for a in &mut aggregated {
            *a /= positions as f32;
        }
        let ranked = rank_classes(&aggregated, &self.labels);
        Ok(StyleResult { per_patch, aggregated, ranked })
    }

    /// Reference implementation of the sliding window: independently crop
    /// every 50x50 window at stride 4 and run the stack on each. Exists to
    /// pin down what [`StyleNet::infer`] must equal, position by position.
    pub fn infer_patchwise(&self, input: &Tensor<f32>) -> Result<Vec<Vec<f32>>, StyleError> {
        Self::check_input(input)?;
        let width = input.width();
        let mut rows = Vec::with_capacity(Self::patch_count(width));
        let mut x0 = 0;
        while x0 + RECEPTIVE_FIELD <= width {
            let window = input.crop(0, x0, INPUT_HEIGHT, RECEPTIVE_FIELD)?;
            let out = self.forward(&window)?;
            let (classes, _, _) = out.shape();
            rows.push((0..classes).map(|c| out.get(c, 0, 0)).collect());
            x0 += OUTPUT_STRIDE;
        }
        Ok(rows)
    }
}

/// Descending by confidence, ties broken by ascending class index.
fn rank_classes(probs: &[f32], labels: &[String]) -> Vec<RankedClass> {
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[b].partial_cmp(&probs[a]).unwrap().then(a.cmp(&b)));
    order
        .into_iter()
        .map(|i| RankedClass { index: i, label: labels[i].clone(), confidence: probs[i] })
        .collect()
}

/// Composed receptive field, output stride, and max-pool count of a stack.
fn stack_geometry(layers: &[Layer<f32>]) -> ((usize, usize), (usize, usize), usize) {
    let mut rf = (1usize, 1usize);
    let mut jump = (1usize, 1usize);
    let mut pools = 0usize;
    for layer in layers {
        let (kernel, stride) = match layer {
            Layer::Conv(l) => (l.kernel, l.stride),
            Layer::DepthwiseSepConv(l) => (l.kernel, l.stride),
            Layer::MaxPool(l) => {
                pools += 1;
                (l.kernel, l.stride)
            }
            _ => continue,
        };
        rf.0 += (kernel.0 - 1) * jump.0;
        rf.1 += (kernel.1 - 1) * jump.1;
        jump.0 *= stride.0;
        jump.1 *= stride.1;
    }
    (rf, jump, pools)
}

fn validate_stack(layers: &[Layer<f32>], class_count: usize) -> Result<(), StyleError> {
    if class_count == 0 {
        return Err(StyleError::BadModel("no class labels".into()));
    }
    if layers.len() < 2 {
        return Err(StyleError::BadModel("stack too short".into()));
    }

    let (rf, stride, pools) = stack_geometry(layers);
    if pools != 2 {
        return Err(StyleError::BadModel(format!("expected exactly 2 max-pool layers, found {pools}")));
    }
    for layer in layers {
        if let Layer::MaxPool(p) = layer {
            if p.kernel != (2, 2) || p.stride != (2, 2) {
                return Err(StyleError::BadModel("max-pool layers must be 2x2 stride 2".into()));
            }
        }
    }
    if rf != (RECEPTIVE_FIELD, RECEPTIVE_FIELD) {
        return Err(StyleError::BadModel(format!(
            "receptive field {rf:?}, required ({RECEPTIVE_FIELD}, {RECEPTIVE_FIELD})"
        )));
    }
    if stride != (OUTPUT_STRIDE, OUTPUT_STRIDE) {
        return Err(StyleError::BadModel(format!(
            "output stride {stride:?}, required ({OUTPUT_STRIDE}, {OUTPUT_STRIDE})"
        )));
    }
    match (&layers[layers.len() - 2], &layers[layers.len() - 1]) {
        (Layer::Conv(head), Layer::Softmax) => {
            if head.out_channels != class_count {
                return Err(StyleError::BadModel(format!(
                    "head produces {} channels for {class_count} classes",
                    head.out_channels
                )));
            }
        }
        _ => {
            return Err(StyleError::BadModel(
                "stack must end with a convolution followed by a channel softmax".into(),
            ))
        }
    }

    // Dry-run shape propagation: a 50x50 grayscale input must collapse to a
    // single position per class.
    let mut shape = (1usize, RECEPTIVE_FIELD, RECEPTIVE_FIELD);
    for (i, layer) in layers.iter().enumerate() {
        shape = layer
            .output_shape(shape)
            .map_err(|e| StyleError::BadModel(format!("layer {i}: {e}")))?;
    }
    if shape != (class_count, 1, 1) {
        return Err(StyleError::BadModel(format!(
            "a {RECEPTIVE_FIELD}x{RECEPTIVE_FIELD} input must produce 1x1 per class, got {shape:?}"
        )));
    }
    Ok(())
}

/// Convert a cropped text image into the network's input tensor: grayscale,
/// rescaled to height 50 with width capped at 80, right-padded with the
/// median border intensity up to width 50 when narrower, values in [0, 1].
pub fn preprocess(image: &ImageBuffer) -> Result<Tensor<f32>, StyleError> {
    if image.width() == 0 || image.height() == 0 {
        return Err(StyleError::EmptyImage);
    }
    let (w, h) = (image.width(), image.height());

    let mut gray = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let p = image.pixel(x, y);
            let v = if image.channels() == 1 {
                p[0] as f32
            } else {
                0.299 * p[0] as f32 + 0.587 * p[1] as f32 + 0.114 * p[2] as f32
            };
            gray.push(v / 255.0);
        }
    }

    let target_w =
        (((w as f64) * INPUT_HEIGHT as f64 / h as f64).round() as usize).clamp(1, MAX_WIDTH);
    let resized = if (w, h) == (target_w, INPUT_HEIGHT) {
        gray
    } else {
        resize_bilinear(&gray, w, h, target_w, INPUT_HEIGHT)
    };

    if target_w >= MIN_WIDTH {
        Ok(Tensor::new(1, INPUT_HEIGHT, target_w, resized)?)
    } else {
        let pad = median_border_intensity(&resized, target_w, INPUT_HEIGHT);
        let mut padded = Vec::with_capacity(INPUT_HEIGHT * MIN_WIDTH);
        for y in 0..INPUT_HEIGHT {
            padded.extend_from_slice(&resized[y * target_w..(y + 1) * target_w]);
            padded.extend(std::iter::repeat_n(pad, MIN_WIDTH - target_w));
        }
        Ok(Tensor::new(1, INPUT_HEIGHT, MIN_WIDTH, padded)?)
    }
}

/// Lower median of the one-pixel border frame.
fn median_border_intensity(plane: &[f32], w: usize, h: usize) -> f32 {
    let mut border = Vec::with_capacity(2 * w + 2 * h);
    for x in 0..w {
        border.push(plane[x]);
        border.push(plane[(h - 1) * w + x]);
    }
    for y in 1..h.saturating_sub(1) {
        border.push(plane[y * w]);
        border.push(plane[y * w + w - 1]);
    }
    border.sort_by(|a, b| a.partial_cmp(b).unwrap());
    border[(border.len() - 1) / 2]
}
