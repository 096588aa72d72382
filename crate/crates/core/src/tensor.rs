//! Dense 4-D tensors (batch, channel, row, col) and trainable parameters.

use crate::error::{Error, Result};

/// A dense `f32` tensor indexed `(batch, channel, row, col)`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor4 {
    shape: [usize; 4],
    data: Vec<f32>,
}

impl Tensor4 {
    pub fn zeros(shape: [usize; 4]) -> Self {
        Tensor4 {
            shape,
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn filled(shape: [usize; 4], v: f32) -> Self {
        Tensor4 {
            shape,
            data: vec![v; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: [usize; 4], data: Vec<f32>) -> Result<Self> {
        let need: usize = shape.iter().product();
        if data.len() != need {
            return Err(Error::ShapeMismatch {
                context: "Tensor4::from_vec",
                expected: format!("{need} values for shape {shape:?}"),
                got: format!("{}", data.len()),
            });
        }
        Ok(Tensor4 { shape, data })
    }

    #[inline]
    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    /// Contiguous `HxW` plane of one (batch, channel) pair.
    #[inline]
    pub fn plane(&self, n: usize, c: usize) -> &[f32] {
        let [_, cs, h, w] = self.shape;
        let off = (n * cs + c) * h * w;
        &self.data[off..off + h * w]
    }

    #[inline]
    pub fn plane_mut(&mut self, n: usize, c: usize) -> &mut [f32] {
        let [_, cs, h, w] = self.shape;
        let off = (n * cs + c) * h * w;
        &mut self.data[off..off + h * w]
    }

    #[inline]
    pub fn at(&self, n: usize, c: usize, y: usize, x: usize) -> f32 {
        let [_, cs, h, w] = self.shape;
        self.data[((n * cs + c) * h + y) * w + x]
    }

    #[inline]
    pub fn at_mut(&mut self, n: usize, c: usize, y: usize, x: usize) -> &mut f32 {
        let [_, cs, h, w] = self.shape;
        &mut self.data[((n * cs + c) * h + y) * w + x]
    }

    pub fn fill(&mut self, v: f32) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Max absolute difference; shapes must match.
    pub fn max_abs_diff(&self, other: &Tensor4) -> f32 {
        assert_eq!(self.shape, other.shape);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max)
    }
}

/// A tensor with a gradient buffer of the same shape.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameter {
    pub value: Tensor4,
    pub grad: Tensor4,
    pub trainable: bool,
}

impl Parameter {
    pub fn new(value: Tensor4) -> Self {
        let grad = Tensor4::zeros(value.shape());
        Parameter {
            value,
            grad,
            trainable: true,
        }
    }

    pub fn frozen(value: Tensor4) -> Self {
        let grad = Tensor4::zeros(value.shape());
        Parameter {
            value,
            grad,
            trainable: false,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_checks_length() {
        assert!(Tensor4::from_vec([1, 1, 2, 2], vec![0.0; 3]).is_err());
        assert!(Tensor4::from_vec([1, 1, 2, 2], vec![0.0; 4]).is_ok());
    }

    #[test]
    fn plane_offsets() {
        let mut t = Tensor4::zeros([2, 3, 2, 2]);
        *t.at_mut(1, 2, 1, 1) = 7.0;
        assert_eq!(t.plane(1, 2)[3], 7.0);
        assert_eq!(t.at(1, 2, 1, 1), 7.0);
    }
}
