use std::fmt;

/// Element type for tensors and layer parameters. Inference runs in `f32`;
/// gradient checking uses `f64`.
pub trait Scalar: num_traits::Float + fmt::Debug + fmt::Display + Default + 'static {}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Convert an `f64` constant into the active scalar type.
pub fn scalar<T: Scalar>(x: f64) -> T {
    T::from(x).expect("f64 constant representable in scalar type")
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorError {
    ShapeMismatch(String),
    LengthMismatch(String),
    NonFiniteInput,
}

impl fmt::Display for TensorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TensorError::ShapeMismatch(msg) => write!(f, "shape mismatch: {msg}"),
            TensorError::LengthMismatch(msg) => write!(f, "length mismatch: {msg}"),
            TensorError::NonFiniteInput => write!(f, "input contains NaN or infinite values"),
        }
    }
}

impl std::error::Error for TensorError {}

/// Dense rank-3 array in row-major (channel, row, column) order, with an
/// optional gradient buffer of identical shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<T>,
    grad: Option<Vec<T>>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<T>) -> Result<Self, TensorError> {
        let expected = channels * height * width;
        if data.len() != expected {
            return Err(TensorError::LengthMismatch(format!(
                "tensor {channels}x{height}x{width} expects {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor { channels, height, width, data, grad: None })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Tensor {
            channels,
            height,
            width,
            data: vec![T::zero(); channels * height * width],
            grad: None,
        }
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: T) -> Self {
        Tensor {
            channels,
            height,
            width,
            data: vec![value; channels * height * width],
            grad: None,
        }
    }

    pub fn from_fn<F: FnMut(usize, usize, usize) -> T>(
        channels: usize,
        height: usize,
        width: usize,
        mut f: F,
    ) -> Self {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        Tensor { channels, height, width, data, grad: None }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, c: usize, y: usize, x: usize) -> usize {
        (c * self.height + y) * self.width + x
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> T {
        self.data[self.index(c, y, x)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, value: T) {
        let i = self.index(c, y, x);
        self.data[i] = value;
    }

    /// One image row of one channel as a slice.
    #[inline]
    pub fn row(&self, c: usize, y: usize) -> &[T] {
        let start = (c * self.height + y) * self.width;
        &self.data[start..start + self.width]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn grad(&self) -> Option<&[T]> {
        self.grad.as_deref()
    }

    /// Allocate (or reset) the gradient buffer to zeros.
    pub fn zero_grad(&mut self) {
        self.grad = Some(vec![T::zero(); self.data.len()]);
    }

    pub fn set_grad(&mut self, grad: Vec<T>) -> Result<(), TensorError> {
        if grad.len() != self.data.len() {
            return Err(TensorError::LengthMismatch(format!(
                "gradient has {} values, tensor has {}",
                grad.len(),
                self.data.len()
            )));
        }
        self.grad = Some(grad);
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Crop a spatial window (all channels), copying the data.
    pub fn crop(&self, y0: usize, x0: usize, height: usize, width: usize) -> Result<Self, TensorError> {
        if y0 + height > self.height || x0 + width > self.width {
            return Err(TensorError::ShapeMismatch(format!(
                "crop {height}x{width}@({y0},{x0}) exceeds tensor {}x{}",
                self.height, self.width
            )));
        }
        let mut data = Vec::with_capacity(self.channels * height * width);
        for c in 0..self.channels {
            for y in y0..y0 + height {
                let start = (c * self.height + y) * self.width + x0;
                data.extend_from_slice(&self.data[start..start + width]);
            }
        }
        Tensor::new(self.channels, height, width, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_rejects_wrong_length() {
        assert!(Tensor::<f32>::new(2, 3, 4, vec![0.0; 23]).is_err());
        assert!(Tensor::<f32>::new(2, 3, 4, vec![0.0; 24]).is_ok());
    }

    #[test]
    fn indexing_is_row_major_chw() {
        let t = Tensor::<f32>::from_fn(2, 3, 4, |c, y, x| (c * 100 + y * 10 + x) as f32);
        assert_eq!(t.get(0, 0, 0), 0.0);
        assert_eq!(t.get(0, 1, 2), 12.0);
        assert_eq!(t.get(1, 2, 3), 123.0);
        assert_eq!(t.row(1, 2), &[120.0, 121.0, 122.0, 123.0]);
    }

    #[test]
    fn crop_copies_window() {
        let t = Tensor::<f64>::from_fn(1, 4, 5, |_, y, x| (y * 5 + x) as f64);
        let c = t.crop(1, 2, 2, 3).unwrap();
        assert_eq!(c.shape(), (1, 2, 3));
        assert_eq!(c.data(), &[7.0, 8.0, 9.0, 12.0, 13.0, 14.0]);
        assert!(t.crop(3, 0, 2, 2).is_err());
    }

    #[test]
    fn grad_buffer_matches_shape() {
        let mut t = Tensor::<f32>::zeros(1, 2, 2);
        assert!(t.grad().is_none());
        t.zero_grad();
        assert_eq!(t.grad().unwrap().len(), 4);
        assert!(t.set_grad(vec![0.0; 3]).is_err());
    }
}
