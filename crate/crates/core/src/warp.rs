//! Motion compensation and occlusion masking.
//!
//! Warps the reference frame onto the target with bilinear interpolation and
//! builds a binary visibility mask: pixels where the flow divergence is large
//! or the displaced position leaves the image domain are excluded, and the
//! excluded region is grown by a small dilation for conservatism.

use crate::error::{Error, Result};
use crate::flow::{tvl1_flow, FlowConfig, FlowField};
use crate::frame::Frame;

/// Per-pixel binary visibility; 1 = usable for the loss.
#[derive(Clone, Debug, PartialEq)]
pub struct OcclusionMask {
    pub h: usize,
    pub w: usize,
    bits: Vec<u8>,
}

impl OcclusionMask {
    pub fn ones(h: usize, w: usize) -> Self {
        OcclusionMask {
            h,
            w,
            bits: vec![1; h * w],
        }
    }

    pub fn zeros_mask(h: usize, w: usize) -> Self {
        OcclusionMask {
            h,
            w,
            bits: vec![0; h * w],
        }
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> bool {
        self.bits[y * self.w + x] != 0
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, v: bool) {
        self.bits[y * self.w + x] = v as u8;
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().map(|&b| b as usize).sum()
    }

    /// Fraction of usable pixels.
    pub fn fraction(&self) -> f64 {
        if self.bits.is_empty() {
            return 0.0;
        }
        self.count_ones() as f64 / self.bits.len() as f64
    }

    /// Pointwise AND with another mask of the same dims.
    pub fn intersect(&mut self, other: &OcclusionMask) {
        assert_eq!((self.h, self.w), (other.h, other.w));
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a &= *b;
        }
    }

    /// Grows the zero-region by a Chebyshev radius: a pixel becomes 0 if any
    /// pixel within the radius is 0. Radius 0 is the identity.
    pub fn dilate_zeros(&self, radius: usize) -> OcclusionMask {
        if radius == 0 {
            return self.clone();
        }
        let (h, w) = (self.h, self.w);
        // separable min filter: horizontal, then vertical
        let mut tmp = vec![1u8; h * w];
        for y in 0..h {
            for x in 0..w {
                let lo = x.saturating_sub(radius);
                let hi = (x + radius).min(w - 1);
                let mut m = 1u8;
                for xx in lo..=hi {
                    m &= self.bits[y * w + xx];
                }
                tmp[y * w + x] = m;
            }
        }
        let mut out = OcclusionMask::zeros_mask(h, w);
        for y in 0..h {
            let lo = y.saturating_sub(radius);
            let hi = (y + radius).min(h - 1);
            for x in 0..w {
                let mut m = 1u8;
                for yy in lo..=hi {
                    m &= tmp[yy * w + x];
                }
                out.bits[y * w + x] = m;
            }
        }
        out
    }

    /// 0/1 mask as a frame with values 0.0 / 1.0 (for PGM export, where it
    /// becomes 0/255).
    pub fn to_frame(&self) -> Frame {
        Frame {
            h: self.h,
            w: self.w,
            data: self.bits.iter().map(|&b| b as f32).collect(),
        }
    }
}

/// Occlusion detection parameters.
#[derive(Clone, Copy, Debug)]
pub struct OcclusionConfig {
    /// Threshold on |div v|; larger divergence marks a pixel occluded.
    pub tau_div: f32,
    /// Chebyshev radius by which the occluded region is grown.
    pub dilation_radius: usize,
}

impl Default for OcclusionConfig {
    fn default() -> Self {
        OcclusionConfig {
            tau_div: 0.5,
            dilation_radius: 1,
        }
    }
}

impl OcclusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_div > 0.0) || !self.tau_div.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "tau_div must be positive, got {}",
                self.tau_div
            )));
        }
        Ok(())
    }
}

#[inline]
fn in_domain(y: f32, x: f32, h: usize, w: usize) -> bool {
    x >= 0.0 && x <= (w - 1) as f32 && y >= 0.0 && y <= (h - 1) as f32
}

/// Samples `reference` at `x + v(x)` with bilinear interpolation.
///
/// The validity mask is 0 wherever the sample position falls outside the
/// continuous image domain; those pixels still receive a border-clamped
/// value but must not contribute to any loss.
pub fn warp_bilinear(reference: &Frame, flow: &FlowField) -> Result<(Frame, OcclusionMask)> {
    if reference.h != flow.h || reference.w != flow.w {
        return Err(Error::DimsMismatch {
            context: "warp_bilinear",
            a_h: reference.h,
            a_w: reference.w,
            b_h: flow.h,
            b_w: flow.w,
        });
    }
    let (h, w) = (reference.h, reference.w);
    let mut out = Frame::zeros(h, w);
    let mut valid = OcclusionMask::ones(h, w);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let sx = x as f32 + flow.u[i];
            let sy = y as f32 + flow.v[i];
            out.data[i] = reference.sample_clamped(sy, sx);
            if !in_domain(sy, sx, h, w) {
                valid.bits[i] = 0;
            }
        }
    }
    Ok((out, valid))
}

/// Flow divergence `du/dx + dv/dy`: central differences in the interior,
/// one-sided at the borders.
pub fn divergence(flow: &FlowField) -> Frame {
    let (h, w) = (flow.h, flow.w);
    let mut out = Frame::zeros(h, w);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let dudx = if w == 1 {
                0.0
            } else if x == 0 {
                flow.u[i + 1] - flow.u[i]
            } else if x == w - 1 {
                flow.u[i] - flow.u[i - 1]
            } else {
                0.5 * (flow.u[i + 1] - flow.u[i - 1])
            };
            let dvdy = if h == 1 {
                0.0
            } else if y == 0 {
                flow.v[i + w] - flow.v[i]
            } else if y == h - 1 {
                flow.v[i] - flow.v[i - w]
            } else {
                0.5 * (flow.v[i + w] - flow.v[i - w])
            };
            out.data[i] = dudx + dvdy;
        }
    }
    out
}

/// Occlusion mask from a flow field: 0 where `|div v| > tau`, 0 where the
/// displaced position exits the domain, then the zero-region is dilated.
pub fn occlusion_mask(flow: &FlowField, cfg: &OcclusionConfig) -> OcclusionMask {
    let (h, w) = (flow.h, flow.w);
    let div = divergence(flow);
    let mut mask = OcclusionMask::ones(h, w);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if div.data[i].abs() > cfg.tau_div {
                mask.bits[i] = 0;
            } else {
                let sx = x as f32 + flow.u[i];
                let sy = y as f32 + flow.v[i];
                if !in_domain(sy, sx, h, w) {
                    mask.bits[i] = 0;
                }
            }
        }
    }
    mask.dilate_zeros(cfg.dilation_radius)
}

/// A motion-compensated training pair: the warped reference and the pixels
/// on which it is trustworthy.
#[derive(Clone, Debug)]
pub struct TrainingPair {
    pub warped: Frame,
    pub mask: OcclusionMask,
    pub flow: FlowField,
}

impl TrainingPair {
    /// True when no pixel survives masking; such pairs are skipped upstream.
    pub fn is_empty(&self) -> bool {
        self.mask.count_ones() == 0
    }
}

/// Builds the training pair for a (target, reference) frame pair: estimates
/// the flow from `f_t` to `f_ref`, warps `f_ref` onto `f_t` and intersects
/// the occlusion mask with the warp validity mask.
pub fn build_pair(
    f_t: &Frame,
    f_ref: &Frame,
    flow_cfg: &FlowConfig,
    occ_cfg: &OcclusionConfig,
) -> Result<TrainingPair> {
    if !f_t.same_dims(f_ref) {
        return Err(Error::DimsMismatch {
            context: "build_pair",
            a_h: f_t.h,
            a_w: f_t.w,
            b_h: f_ref.h,
            b_w: f_ref.w,
        });
    }
    let flow = tvl1_flow(f_t, f_ref, flow_cfg)?;
    build_pair_with_flow(f_ref, flow, occ_cfg)
}

/// As [`build_pair`] but with an externally supplied flow field.
pub fn build_pair_with_flow(
    f_ref: &Frame,
    flow: FlowField,
    occ_cfg: &OcclusionConfig,
) -> Result<TrainingPair> {
    let (warped, validity) = warp_bilinear(f_ref, &flow)?;
    let mut mask = occlusion_mask(&flow, occ_cfg);
    mask.intersect(&validity);
    Ok(TrainingPair { warped, mask, flow })
}
