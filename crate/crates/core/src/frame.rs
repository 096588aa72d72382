//! Grayscale frames and frame sequences.

use crate::error::{Error, Result};
use crate::tensor::Tensor4;

/// A single grayscale image, nominally in `[0, 1]`, row-major.
///
/// Values are not clamped: noisy frames may exceed the nominal range.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub h: usize,
    pub w: usize,
    pub data: Vec<f32>,
}

impl Frame {
    pub fn new(h: usize, w: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != h * w {
            return Err(Error::ShapeMismatch {
                context: "Frame::new",
                expected: format!("{} values", h * w),
                got: format!("{}", data.len()),
            });
        }
        Ok(Frame { h, w, data })
    }

    pub fn zeros(h: usize, w: usize) -> Self {
        Frame {
            h,
            w,
            data: vec![0.0; h * w],
        }
    }

    pub fn filled(h: usize, w: usize, v: f32) -> Self {
        Frame {
            h,
            w,
            data: vec![v; h * w],
        }
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize) -> f32 {
        self.data[y * self.w + x]
    }

    #[inline]
    pub fn at_mut(&mut self, y: usize, x: usize) -> &mut f32 {
        &mut self.data[y * self.w + x]
    }

    pub fn row(&self, y: usize) -> &[f32] {
        &self.data[y * self.w..(y + 1) * self.w]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn same_dims(&self, other: &Frame) -> bool {
        self.h == other.h && self.w == other.w
    }

    /// Bilinear sample at a continuous position with border clamp.
    pub fn sample_clamped(&self, y: f32, x: f32) -> f32 {
        let xc = x.clamp(0.0, (self.w - 1) as f32);
        let yc = y.clamp(0.0, (self.h - 1) as f32);
        let x0 = xc.floor();
        let y0 = yc.floor();
        let fx = xc - x0;
        let fy = yc - y0;
        let x0 = x0 as usize;
        let y0 = y0 as usize;
        let x1 = (x0 + 1).min(self.w - 1);
        let y1 = (y0 + 1).min(self.h - 1);
        let v00 = self.at(y0, x0);
        let v01 = self.at(y0, x1);
        let v10 = self.at(y1, x0);
        let v11 = self.at(y1, x1);
        let top = v00 + fx * (v01 - v00);
        let bot = v10 + fx * (v11 - v10);
        top + fy * (bot - top)
    }

    /// View as a `1x1xHxW` tensor.
    pub fn to_tensor(&self) -> Tensor4 {
        Tensor4::from_vec([1, 1, self.h, self.w], self.data.clone()).expect("frame shape")
    }

    pub fn from_tensor(t: &Tensor4) -> Result<Frame> {
        let [n, c, h, w] = t.shape();
        if n != 1 || c != 1 {
            return Err(Error::ShapeMismatch {
                context: "Frame::from_tensor",
                expected: "1x1xHxW".into(),
                got: format!("{n}x{c}x{h}x{w}"),
            });
        }
        Frame::new(h, w, t.data().to_vec())
    }
}

/// An RGB image used only as input to grayscale preparation.
#[derive(Clone, Debug)]
pub struct RgbFrame {
    pub h: usize,
    pub w: usize,
    pub r: Vec<f32>,
    pub g: Vec<f32>,
    pub b: Vec<f32>,
}

/// An ordered list of equally sized frames; the frame index `t` is 1-based.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSequence {
    frames: Vec<Frame>,
}

impl FrameSequence {
    pub fn empty() -> Self {
        FrameSequence { frames: Vec::new() }
    }

    /// Builds a sequence, rejecting mixed dimensions. The offending index in
    /// the error is 1-based.
    pub fn from_frames(frames: Vec<Frame>) -> Result<Self> {
        if let Some(first) = frames.first() {
            let (h, w) = (first.h, first.w);
            for (i, f) in frames.iter().enumerate() {
                if f.h != h || f.w != w {
                    return Err(Error::InconsistentDims {
                        index: i + 1,
                        exp_h: h,
                        exp_w: w,
                        got_h: f.h,
                        got_w: f.w,
                    });
                }
            }
        }
        Ok(FrameSequence { frames })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dims(&self) -> Option<(usize, usize)> {
        self.frames.first().map(|f| (f.h, f.w))
    }

    /// 1-based access, matching the frame index convention used everywhere.
    pub fn frame(&self, t: usize) -> &Frame {
        &self.frames[t - 1]
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn push(&mut self, f: Frame) -> Result<()> {
        if let Some((h, w)) = self.dims() {
            if f.h != h || f.w != w {
                return Err(Error::InconsistentDims {
                    index: self.frames.len() + 1,
                    exp_h: h,
                    exp_w: w,
                    got_h: f.h,
                    got_w: f.w,
                });
            }
        }
        self.frames.push(f);
        Ok(())
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Frame> {
        self.frames.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_is_exact_on_ramp() {
        let w = 8;
        let f = Frame::new(4, w, (0..32).map(|i| (i % w) as f32).collect()).unwrap();
        assert_eq!(f.sample_clamped(1.0, 2.5), 2.5);
        assert_eq!(f.sample_clamped(2.25, 3.0), 3.0);
    }

    #[test]
    fn sequence_rejects_mixed_dims() {
        let a = Frame::zeros(4, 4);
        let b = Frame::zeros(4, 5);
        let err = FrameSequence::from_frames(vec![a, b]).unwrap_err();
        match err {
            Error::InconsistentDims { index, .. } => assert_eq!(index, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }
}
