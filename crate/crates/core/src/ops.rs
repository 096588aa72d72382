//! Differentiable operators: 2-D convolution, ReLU, batch normalization and
//! masked losses.
//!
//! Forward and backward passes are explicit functions; the model module
//! chains them. All kernels accumulate in a fixed order, so results are
//! bit-identical across runs and thread counts (parallel work is split over
//! disjoint output regions only).

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::{Parameter, Tensor4};
use crate::warp::OcclusionMask;

/// Dot product with eight independent accumulators, summed in fixed order.
/// Breaks the serial FP dependency so the loop vectorizes.
#[inline]
fn dot8(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f32; 8];
    let chunks = a.len() / 8;
    for i in 0..chunks {
        let ai = &a[i * 8..i * 8 + 8];
        let bi = &b[i * 8..i * 8 + 8];
        for l in 0..8 {
            acc[l] += ai[l] * bi[l];
        }
    }
    let mut tail = 0.0f32;
    for i in chunks * 8..a.len() {
        tail += a[i] * b[i];
    }
    let mut s = 0.0f32;
    for l in 0..8 {
        s += acc[l];
    }
    s + tail
}

#[inline]
fn axpy(out: &mut [f32], a: f32, x: &[f32]) {
    debug_assert_eq!(out.len(), x.len());
    for (o, v) in out.iter_mut().zip(x) {
        *o += a * *v;
    }
}

/// Fused 3x3 correlation with zero padding, accumulating into `out`
/// (`out[y][x] += sum k[dy][dx] * inp[y+dy-1][x+dx-1]`). One pass per row
/// keeps the inner loop a straight run of FMAs.
fn stencil3_acc(out: &mut [f32], inp: &[f32], h: usize, w: usize, k: &[f32; 9]) {
    debug_assert!(w >= 3);
    for y in 0..h {
        let orow = &mut out[y * w..(y + 1) * w];
        for dy in 0..3usize {
            let iy = y as isize + dy as isize - 1;
            if iy < 0 || iy >= h as isize {
                continue;
            }
            let irow = &inp[iy as usize * w..iy as usize * w + w];
            let (k0, k1, k2) = (k[dy * 3], k[dy * 3 + 1], k[dy * 3 + 2]);
            orow[0] += k1 * irow[0] + k2 * irow[1];
            let n = w - 2;
            let (a, b, c) = (&irow[0..n], &irow[1..1 + n], &irow[2..2 + n]);
            for (i, o) in orow[1..1 + n].iter_mut().enumerate() {
                *o += k0 * a[i] + k1 * b[i] + k2 * c[i];
            }
            orow[w - 1] += k0 * irow[w - 2] + k1 * irow[w - 1];
        }
    }
}

/// Three shift-correlated dot products in one pass (the x-1, x, x+1 taps of
/// a 3-wide kernel row), eight accumulator lanes each, fixed summation
/// order.
fn dot3_shifted(g: &[f32], a: &[f32], b: &[f32], c: &[f32]) -> (f32, f32, f32) {
    let n = g.len();
    debug_assert!(a.len() == n && b.len() == n && c.len() == n);
    let mut acc0 = [0.0f32; 8];
    let mut acc1 = [0.0f32; 8];
    let mut acc2 = [0.0f32; 8];
    let chunks = n / 8;
    for i in 0..chunks {
        let gi = &g[i * 8..i * 8 + 8];
        let ai = &a[i * 8..i * 8 + 8];
        let bi = &b[i * 8..i * 8 + 8];
        let ci = &c[i * 8..i * 8 + 8];
        for l in 0..8 {
            acc0[l] += gi[l] * ai[l];
            acc1[l] += gi[l] * bi[l];
            acc2[l] += gi[l] * ci[l];
        }
    }
    let (mut s0, mut s1, mut s2) = (0.0f32, 0.0f32, 0.0f32);
    for i in chunks * 8..n {
        s0 += g[i] * a[i];
        s1 += g[i] * b[i];
        s2 += g[i] * c[i];
    }
    for l in 0..8 {
        s0 += acc0[l];
        s1 += acc1[l];
        s2 += acc2[l];
    }
    (s0, s1, s2)
}

fn check_conv_shapes(
    input: &Tensor4,
    weights: &Tensor4,
    bias: &Tensor4,
    padding: usize,
) -> Result<(usize, usize, usize, usize, usize, usize)> {
    let [n, ic, h, w] = input.shape();
    let [oc, wic, kh, kw] = weights.shape();
    if kh != kw || kh % 2 == 0 {
        return Err(Error::InvalidConfig(format!(
            "conv kernel must be square with odd size, got {kh}x{kw}"
        )));
    }
    if padding != (kh - 1) / 2 {
        return Err(Error::InvalidConfig(format!(
            "conv padding must be (kernel-1)/2 = {} to preserve size, got {padding}",
            (kh - 1) / 2
        )));
    }
    if wic != ic {
        return Err(Error::ShapeMismatch {
            context: "conv2d input channels",
            expected: format!("input with {wic} channels (weights are {oc}x{wic}x{kh}x{kw})"),
            got: format!("{n}x{ic}x{h}x{w}"),
        });
    }
    if bias.shape() != [1, oc, 1, 1] {
        return Err(Error::ShapeMismatch {
            context: "conv2d bias",
            expected: format!("1x{oc}x1x1"),
            got: format!("{:?}", bias.shape()),
        });
    }
    Ok((n, ic, h, w, oc, kh))
}

/// Same-padding 2-D convolution (zero border). Output spatial dims equal
/// input dims for every odd kernel size.
pub fn conv2d(input: &Tensor4, weights: &Parameter, bias: &Parameter, padding: usize) -> Result<Tensor4> {
    let (n, ic, h, w, oc, k) = check_conv_shapes(input, &weights.value, &bias.value, padding)?;
    let mut out = Tensor4::zeros([n, oc, h, w]);
    let wv = weights.value.data();
    let bv = bias.value.data();
    let plane = h * w;

    out.data_mut()
        .par_chunks_mut(plane)
        .enumerate()
        .for_each(|(idx, op)| {
            let ni = idx / oc;
            let oci = idx % oc;
            op.iter_mut().for_each(|v| *v = bv[oci]);
            for ici in 0..ic {
                let ip = input.plane(ni, ici);
                let wbase = ((oci * ic) + ici) * k * k;
                if k == 3 && w >= 3 {
                    let kern: &[f32; 9] = wv[wbase..wbase + 9].try_into().unwrap();
                    stencil3_acc(op, ip, h, w, kern);
                    continue;
                }
                for ky in 0..k {
                    let dy = ky as isize - padding as isize;
                    let oy_lo = (-dy).max(0) as usize;
                    let oy_hi = (h as isize - dy).min(h as isize) as usize;
                    for oy in oy_lo..oy_hi {
                        let iy = (oy as isize + dy) as usize;
                        let irow = &ip[iy * w..iy * w + w];
                        let orow = &mut op[oy * w..oy * w + w];
                        for kx in 0..k {
                            let dx = kx as isize - padding as isize;
                            let xa = (-dx).max(0) as usize;
                            let xb = ((w as isize - dx).min(w as isize)) as usize;
                            let cf = wv[wbase + ky * k + kx];
                            let src = &irow[(xa as isize + dx) as usize..(xb as isize + dx) as usize];
                            axpy(&mut orow[xa..xb], cf, src);
                        }
                    }
                }
            }
        });
    Ok(out)
}

/// Backward pass of [`conv2d`]: accumulates into `weights.grad` and
/// `bias.grad`, returns the gradient with respect to the input.
pub fn conv2d_backward(
    input: &Tensor4,
    weights: &mut Parameter,
    bias: &mut Parameter,
    grad_out: &Tensor4,
    padding: usize,
) -> Result<Tensor4> {
    let (n, ic, h, w, oc, k) = check_conv_shapes(input, &weights.value, &bias.value, padding)?;
    if grad_out.shape() != [n, oc, h, w] {
        return Err(Error::ShapeMismatch {
            context: "conv2d_backward grad_out",
            expected: format!("{:?}", [n, oc, h, w]),
            got: format!("{:?}", grad_out.shape()),
        });
    }

    // Weight and bias gradients, parallel over output channels.
    let wgrad = weights.grad.data_mut();
    let bgrad = bias.grad.data_mut();
    let kk = k * k;
    wgrad
        .par_chunks_mut(ic * kk)
        .zip(bgrad.par_iter_mut())
        .enumerate()
        .for_each(|(oci, (wg, bg))| {
            let mut bacc = 0.0f32;
            for ni in 0..n {
                let gp = grad_out.plane(ni, oci);
                for oy in 0..h {
                    let grow = &gp[oy * w..oy * w + w];
                    let mut s = 0.0f32;
                    for v in grow {
                        s += v;
                    }
                    bacc += s;
                }
                for ici in 0..ic {
                    let ip = input.plane(ni, ici);
                    if k == 3 && w >= 3 {
                        for ky in 0..3usize {
                            let dy = ky as isize - 1;
                            let oy_lo = (-dy).max(0) as usize;
                            let oy_hi = (h as isize - dy).min(h as isize) as usize;
                            let (mut t0, mut t1, mut t2) = (0.0f32, 0.0f32, 0.0f32);
                            for oy in oy_lo..oy_hi {
                                let iy = (oy as isize + dy) as usize;
                                let irow = &ip[iy * w..iy * w + w];
                                let grow = &gp[oy * w..oy * w + w];
                                let m = w - 2;
                                let (d0, d1, d2) = dot3_shifted(
                                    &grow[1..1 + m],
                                    &irow[0..m],
                                    &irow[1..1 + m],
                                    &irow[2..2 + m],
                                );
                                t0 += d0 + grow[w - 1] * irow[w - 2];
                                t1 += d1 + grow[0] * irow[0] + grow[w - 1] * irow[w - 1];
                                t2 += d2 + grow[0] * irow[1];
                            }
                            wg[ici * kk + ky * 3] += t0;
                            wg[ici * kk + ky * 3 + 1] += t1;
                            wg[ici * kk + ky * 3 + 2] += t2;
                        }
                        continue;
                    }
                    for ky in 0..k {
                        let dy = ky as isize - padding as isize;
                        let oy_lo = (-dy).max(0) as usize;
                        let oy_hi = (h as isize - dy).min(h as isize) as usize;
                        for oy in oy_lo..oy_hi {
                            let iy = (oy as isize + dy) as usize;
                            let irow = &ip[iy * w..iy * w + w];
                            let grow = &gp[oy * w..oy * w + w];
                            for kx in 0..k {
                                let dx = kx as isize - padding as isize;
                                let xa = (-dx).max(0) as usize;
                                let xb = ((w as isize - dx).min(w as isize)) as usize;
                                let src = &irow[(xa as isize + dx) as usize..(xb as isize + dx) as usize];
                                wg[ici * kk + ky * k + kx] += dot8(&grow[xa..xb], src);
                            }
                        }
                    }
                }
            }
            *bg += bacc;
        });

    // Input gradient, parallel over (batch, input channel) planes.
    let mut grad_in = Tensor4::zeros([n, ic, h, w]);
    let wv = weights.value.data();
    grad_in
        .data_mut()
        .par_chunks_mut(h * w)
        .enumerate()
        .for_each(|(idx, gip)| {
            let ni = idx / ic;
            let ici = idx % ic;
            for oci in 0..oc {
                let gp = grad_out.plane(ni, oci);
                let wbase = ((oci * ic) + ici) * kk;
                if k == 3 && w >= 3 {
                    // correlation with the 180-degree rotated kernel
                    let src = &wv[wbase..wbase + 9];
                    let mut rot = [0.0f32; 9];
                    for (i, r) in rot.iter_mut().enumerate() {
                        *r = src[8 - i];
                    }
                    stencil3_acc(gip, gp, h, w, &rot);
                    continue;
                }
                for ky in 0..k {
                    let dy = ky as isize - padding as isize;
                    let oy_lo = (-dy).max(0) as usize;
                    let oy_hi = (h as isize - dy).min(h as isize) as usize;
                    for oy in oy_lo..oy_hi {
                        let iy = (oy as isize + dy) as usize;
                        let grow = &gp[oy * w..oy * w + w];
                        let girow = &mut gip[iy * w..iy * w + w];
                        for kx in 0..k {
                            let dx = kx as isize - padding as isize;
                            let xa = (-dx).max(0) as usize;
                            let xb = ((w as isize - dx).min(w as isize)) as usize;
                            let cf = wv[wbase + ky * k + kx];
                            axpy(
                                &mut girow[(xa as isize + dx) as usize..(xb as isize + dx) as usize],
                                cf,
                                &grow[xa..xb],
                            );
                        }
                    }
                }
            }
        });
    Ok(grad_in)
}

/// Elementwise `max(0, x)`.
pub fn relu(input: &Tensor4) -> Tensor4 {
    let mut out = input.clone();
    out.data_mut().iter_mut().for_each(|v| {
        if *v < 0.0 {
            *v = 0.0;
        }
    });
    out
}

/// ReLU backward: gradient is masked where the forward input was negative.
pub fn relu_backward(input: &Tensor4, grad_out: &Tensor4) -> Tensor4 {
    assert_eq!(input.shape(), grad_out.shape());
    let mut g = grad_out.clone();
    g.data_mut().iter_mut().zip(input.data()).for_each(|(gv, iv)| {
        if *iv < 0.0 {
            *gv = 0.0;
        }
    });
    g
}

/// Saved forward state needed by [`batch_norm_backward`].
pub struct BnCache {
    pub xhat: Tensor4,
    pub inv_std: Vec<f32>,
}

fn check_bn_shapes(input: &Tensor4, gamma: &Tensor4, beta: &Tensor4) -> Result<usize> {
    let [_, c, _, _] = input.shape();
    for (t, name) in [(gamma, "gamma"), (beta, "beta")] {
        if t.shape() != [1, c, 1, 1] {
            return Err(Error::ShapeMismatch {
                context: "batch_norm affine",
                expected: format!("1x{c}x1x1 {name}"),
                got: format!("{:?}", t.shape()),
            });
        }
    }
    Ok(c)
}

/// Training-mode batch norm. Statistics are pooled per channel over
/// (batch, row, col); biased variance is used both for normalization and for
/// the running estimate. Running stats are EMA-updated with `momentum`
/// unless `update_running` is false.
pub fn batch_norm_train(
    input: &Tensor4,
    gamma: &Parameter,
    beta: &Parameter,
    running_mean: &mut [f32],
    running_var: &mut [f32],
    momentum: f32,
    eps: f32,
    update_running: bool,
) -> Result<(Tensor4, BnCache)> {
    let c = check_bn_shapes(input, &gamma.value, &beta.value)?;
    let [n, _, h, w] = input.shape();
    let count = (n * h * w) as f64;

    let mut out = Tensor4::zeros(input.shape());
    let mut xhat = Tensor4::zeros(input.shape());
    let mut inv_std = vec![0.0f32; c];

    for ci in 0..c {
        let mut sum = 0.0f64;
        let mut sumsq = 0.0f64;
        for ni in 0..n {
            for &v in input.plane(ni, ci) {
                let v = v as f64;
                sum += v;
                sumsq += v * v;
            }
        }
        let mean = sum / count;
        let var = (sumsq / count - mean * mean).max(0.0);
        let istd = 1.0 / (var + eps as f64).sqrt();
        inv_std[ci] = istd as f32;
        let g = gamma.value.data()[ci];
        let b = beta.value.data()[ci];
        let mean32 = mean as f32;
        let istd32 = istd as f32;
        for ni in 0..n {
            let ip = input.plane(ni, ci);
            let xs: Vec<f32> = ip.iter().map(|&v| (v - mean32) * istd32).collect();
            let xp = xhat.plane_mut(ni, ci);
            xp.copy_from_slice(&xs);
            let op = out.plane_mut(ni, ci);
            for (o, x) in op.iter_mut().zip(&xs) {
                *o = g * x + b;
            }
        }
        if update_running {
            running_mean[ci] = (1.0 - momentum) * running_mean[ci] + momentum * mean32;
            running_var[ci] = (1.0 - momentum) * running_var[ci] + momentum * var as f32;
        }
    }
    Ok((out, BnCache { xhat, inv_std }))
}

/// Eval-mode batch norm using running statistics.
pub fn batch_norm_eval(
    input: &Tensor4,
    gamma: &Parameter,
    beta: &Parameter,
    running_mean: &[f32],
    running_var: &[f32],
    eps: f32,
) -> Result<Tensor4> {
    let c = check_bn_shapes(input, &gamma.value, &beta.value)?;
    let [n, _, _, _] = input.shape();
    let mut out = Tensor4::zeros(input.shape());
    for ci in 0..c {
        let istd = 1.0 / (running_var[ci] + eps).sqrt();
        let scale = gamma.value.data()[ci] * istd;
        let shift = beta.value.data()[ci] - running_mean[ci] * scale;
        for ni in 0..n {
            let ip = input.plane(ni, ci);
            let op = out.plane_mut(ni, ci);
            for (o, &v) in op.iter_mut().zip(ip) {
                *o = scale * v + shift;
            }
        }
    }
    Ok(out)
}

/// Training-mode batch norm backward, with the full gradient through the
/// batch statistics. Accumulates into `gamma.grad` / `beta.grad` and returns
/// the input gradient.
pub fn batch_norm_backward(
    cache: &BnCache,
    gamma: &mut Parameter,
    beta: &mut Parameter,
    grad_out: &Tensor4,
) -> Tensor4 {
    let [n, c, h, w] = grad_out.shape();
    assert_eq!(cache.xhat.shape(), grad_out.shape());
    let count = (n * h * w) as f64;
    let mut grad_in = Tensor4::zeros(grad_out.shape());
    for ci in 0..c {
        let mut sum_dy = 0.0f64;
        let mut sum_dy_xhat = 0.0f64;
        for ni in 0..n {
            let gp = grad_out.plane(ni, ci);
            let xp = cache.xhat.plane(ni, ci);
            for (g, x) in gp.iter().zip(xp) {
                sum_dy += *g as f64;
                sum_dy_xhat += (*g as f64) * (*x as f64);
            }
        }
        gamma.grad.data_mut()[ci] += sum_dy_xhat as f32;
        beta.grad.data_mut()[ci] += sum_dy as f32;

        let g = gamma.value.data()[ci] as f64;
        let istd = cache.inv_std[ci] as f64;
        let mean_dy = sum_dy / count;
        let mean_dy_xhat = sum_dy_xhat / count;
        for ni in 0..n {
            let gp = grad_out.plane(ni, ci);
            let xp = cache.xhat.plane(ni, ci);
            let op = grad_in.plane_mut(ni, ci);
            for ((o, dy), x) in op.iter_mut().zip(gp).zip(xp) {
                let v = g * istd * (*dy as f64 - mean_dy - (*x as f64) * mean_dy_xhat);
                *o = v as f32;
            }
        }
    }
    grad_in
}

/// Which pointwise penalty a masked loss applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossKind {
    L1,
    L2,
}

impl std::str::FromStr for LossKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(LossKind::L1),
            "l2" => Ok(LossKind::L2),
            other => Err(Error::InvalidConfig(format!("unknown loss `{other}`"))),
        }
    }
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LossKind::L1 => write!(f, "l1"),
            LossKind::L2 => write!(f, "l2"),
        }
    }
}

/// Value and prediction-gradient of a masked loss.
pub struct LossResult {
    pub value: f64,
    pub grad: Tensor4,
    /// Total number of unmasked (counted) entries.
    pub active: usize,
}

/// Masked pointwise loss, normalized by the number of unmasked entries:
/// `sum_x k(x) |pred(x)-target(x)|^p / max(1, sum_x k(x))`.
///
/// The mask is a single `HxW` plane applied across batch and channel; `None`
/// counts every pixel. No gradient flows into `target` or the mask. An
/// all-zero mask yields loss 0 with a zero gradient.
pub fn masked_loss(
    kind: LossKind,
    pred: &Tensor4,
    target: &Tensor4,
    mask: Option<&OcclusionMask>,
) -> Result<LossResult> {
    if pred.shape() != target.shape() {
        return Err(Error::ShapeMismatch {
            context: "masked_loss operands",
            expected: format!("{:?}", pred.shape()),
            got: format!("{:?}", target.shape()),
        });
    }
    let [n, c, h, w] = pred.shape();
    if let Some(m) = mask {
        if m.h != h || m.w != w {
            return Err(Error::DimsMismatch {
                context: "masked_loss mask",
                a_h: h,
                a_w: w,
                b_h: m.h,
                b_w: m.w,
            });
        }
    }

    let per_plane_active = match mask {
        Some(m) => m.count_ones(),
        None => h * w,
    };
    let active = per_plane_active * n * c;
    let mut grad = Tensor4::zeros(pred.shape());
    if active == 0 {
        return Ok(LossResult {
            value: 0.0,
            grad,
            active,
        });
    }

    let norm = active as f64;
    let mut total = 0.0f64;
    for ni in 0..n {
        for ci in 0..c {
            let pp = pred.plane(ni, ci);
            let tp = target.plane(ni, ci);
            let gp = grad.plane_mut(ni, ci);
            for y in 0..h {
                for x in 0..w {
                    if let Some(m) = mask {
                        if !m.get(y, x) {
                            continue;
                        }
                    }
                    let i = y * w + x;
                    let d = (pp[i] - tp[i]) as f64;
                    match kind {
                        LossKind::L1 => {
                            total += d.abs();
                            gp[i] = if d > 0.0 {
                                (1.0 / norm) as f32
                            } else if d < 0.0 {
                                (-1.0 / norm) as f32
                            } else {
                                0.0
                            };
                        }
                        LossKind::L2 => {
                            total += d * d;
                            gp[i] = (2.0 * d / norm) as f32;
                        }
                    }
                }
            }
        }
    }
    Ok(LossResult {
        value: total / norm,
        grad,
        active,
    })
}

/// Masked mean absolute error; see [`masked_loss`].
pub fn masked_l1_loss(pred: &Tensor4, target: &Tensor4, mask: Option<&OcclusionMask>) -> Result<LossResult> {
    masked_loss(LossKind::L1, pred, target, mask)
}

/// Masked mean squared error; see [`masked_loss`].
pub fn masked_l2_loss(pred: &Tensor4, target: &Tensor4, mask: Option<&OcclusionMask>) -> Result<LossResult> {
    masked_loss(LossKind::L2, pred, target, mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::warp::OcclusionMask;

    fn delta_kernel() -> Parameter {
        let mut w = Tensor4::zeros([1, 1, 3, 3]);
        *w.at_mut(0, 0, 1, 1) = 1.0;
        Parameter::new(w)
    }

    #[test]
    fn conv_identity_kernel() {
        let input = Tensor4::from_vec([1, 1, 5, 5], (0..25).map(|v| v as f32 * 0.1).collect()).unwrap();
        let w = delta_kernel();
        let b = Parameter::new(Tensor4::zeros([1, 1, 1, 1]));
        let out = conv2d(&input, &w, &b, 1).unwrap();
        assert_eq!(out, input);
    }

    #[test]
    fn conv_box_kernel_on_constant() {
        let c = 0.7f32;
        let input = Tensor4::filled([1, 1, 6, 7], c);
        let w = Parameter::new(Tensor4::filled([1, 1, 3, 3], 1.0));
        let b = Parameter::new(Tensor4::zeros([1, 1, 1, 1]));
        let out = conv2d(&input, &w, &b, 1).unwrap();
        for y in 1..5 {
            for x in 1..6 {
                assert!((out.at(0, 0, y, x) - 9.0 * c).abs() < 1e-5);
            }
        }
        // zero-padded corner sees only a 2x2 support
        assert!((out.at(0, 0, 0, 0) - 4.0 * c).abs() < 1e-5);
    }

    #[test]
    fn conv_rejects_channel_mismatch() {
        let input = Tensor4::zeros([1, 2, 5, 5]);
        let w = Parameter::new(Tensor4::zeros([3, 1, 3, 3]));
        let b = Parameter::new(Tensor4::zeros([1, 3, 1, 1]));
        let err = conv2d(&input, &w, &b, 1).unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch { .. }), "{err}");
    }

    #[test]
    fn relu_definition_and_backward() {
        let t = Tensor4::from_vec([1, 1, 1, 3], vec![-1.0, 0.0, 2.0]).unwrap();
        let out = relu(&t);
        assert_eq!(out.data(), &[0.0, 0.0, 2.0]);

        let all_neg = Tensor4::filled([1, 1, 2, 2], -3.0);
        assert!(relu(&all_neg).data().iter().all(|&v| v == 0.0));
        let g = relu_backward(&all_neg, &Tensor4::filled([1, 1, 2, 2], 1.0));
        assert!(g.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bn_train_centers_channels() {
        let data: Vec<f32> = (0..2 * 3 * 4 * 4).map(|i| (i as f32 * 0.37).sin() + 0.5).collect();
        let input = Tensor4::from_vec([2, 3, 4, 4], data).unwrap();
        let gamma = Parameter::new(Tensor4::filled([1, 3, 1, 1], 1.0));
        let beta = Parameter::new(Tensor4::zeros([1, 3, 1, 1]));
        let mut rm = vec![0.0; 3];
        let mut rv = vec![1.0; 3];
        let (out, _) = batch_norm_train(&input, &gamma, &beta, &mut rm, &mut rv, 0.1, 1e-5, true).unwrap();
        for c in 0..3 {
            let mut mean = 0.0f64;
            for n in 0..2 {
                for &v in out.plane(n, c) {
                    mean += v as f64;
                }
            }
            mean /= 32.0;
            assert!(mean.abs() < 1e-6, "channel {c} mean {mean}");
        }
    }

    #[test]
    fn bn_affine_statistics() {
        // gamma=2, beta=3 on any input: train-mode output has mean 3, std 2
        // exactly (up to float error), since xhat is exactly standardized.
        let data: Vec<f32> = (0..10_000).map(|i| ((i * 2654435761u64 as usize) % 1000) as f32 / 250.0).collect();
        let input = Tensor4::from_vec([1, 1, 100, 100], data).unwrap();
        let gamma = Parameter::new(Tensor4::filled([1, 1, 1, 1], 2.0));
        let beta = Parameter::new(Tensor4::filled([1, 1, 1, 1], 3.0));
        let mut rm = vec![0.0];
        let mut rv = vec![1.0];
        let (out, _) = batch_norm_train(&input, &gamma, &beta, &mut rm, &mut rv, 0.1, 1e-5, false).unwrap();
        let n = out.len() as f64;
        let mean: f64 = out.data().iter().map(|&v| v as f64).sum::<f64>() / n;
        let var: f64 = out.data().iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
        assert!((mean - 3.0).abs() < 0.05 * 3.0);
        assert!((var.sqrt() - 2.0).abs() < 0.05 * 2.0);
    }

    #[test]
    fn bn_zero_variance_channel() {
        let input = Tensor4::filled([1, 1, 4, 4], 0.25);
        let gamma = Parameter::new(Tensor4::filled([1, 1, 1, 1], 1.0));
        let beta = Parameter::new(Tensor4::zeros([1, 1, 1, 1]));
        let mut rm = vec![0.0];
        let mut rv = vec![1.0];
        let (out, _) = batch_norm_train(&input, &gamma, &beta, &mut rm, &mut rv, 0.1, 1e-5, true).unwrap();
        assert!(out.is_finite());
        assert!(out.data().iter().all(|&v| v.abs() < 1e-3));
    }

    #[test]
    fn masked_l1_examples() {
        let pred = Tensor4::from_vec([1, 1, 1, 2], vec![1.0, 0.0]).unwrap();
        let target = Tensor4::zeros([1, 1, 1, 2]);
        let mask = OcclusionMask::ones(1, 2);
        let r = masked_l1_loss(&pred, &target, Some(&mask)).unwrap();
        assert_eq!(r.value, 0.5);

        // prediction == target -> 0 for any mask
        let r = masked_l1_loss(&target, &target, Some(&mask)).unwrap();
        assert_eq!(r.value, 0.0);

        // all-zero mask -> 0 loss, zero grad
        let zero = OcclusionMask::zeros_mask(1, 2);
        let r = masked_l1_loss(&pred, &target, Some(&zero)).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.active, 0);
        assert!(r.grad.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn masked_l2_example() {
        let pred = Tensor4::from_vec([1, 1, 1, 2], vec![1.0, 0.0]).unwrap();
        let target = Tensor4::zeros([1, 1, 1, 2]);
        let mask = OcclusionMask::ones(1, 2);
        let r = masked_l2_loss(&pred, &target, Some(&mask)).unwrap();
        assert_eq!(r.value, 0.5);
    }

    #[test]
    fn loss_invariant_to_masked_out_values() {
        let pred = Tensor4::from_vec([1, 1, 2, 2], vec![0.1, 0.9, 0.4, 0.2]).unwrap();
        let mut pred2 = pred.clone();
        *pred2.at_mut(0, 0, 0, 1) = 42.0;
        let target = Tensor4::filled([1, 1, 2, 2], 0.3);
        let mut mask = OcclusionMask::ones(2, 2);
        mask.set(0, 1, false);
        let a = masked_l1_loss(&pred, &target, Some(&mask)).unwrap();
        let b = masked_l1_loss(&pred2, &target, Some(&mask)).unwrap();
        assert_eq!(a.value, b.value);
        assert_eq!(a.grad, b.grad);
    }

    #[test]
    fn loss_batch_duplication_invariance() {
        let pred = Tensor4::from_vec([1, 1, 2, 2], vec![0.1, 0.9, 0.4, 0.2]).unwrap();
        let target = Tensor4::filled([1, 1, 2, 2], 0.3);
        let single = masked_l1_loss(&pred, &target, None).unwrap();

        let mut dd = pred.data().to_vec();
        dd.extend_from_slice(pred.data());
        let pred2 = Tensor4::from_vec([2, 1, 2, 2], dd).unwrap();
        let mut td = target.data().to_vec();
        td.extend_from_slice(target.data());
        let target2 = Tensor4::from_vec([2, 1, 2, 2], td).unwrap();
        let doubled = masked_l1_loss(&pred2, &target2, None).unwrap();
        assert!((single.value - doubled.value).abs() < 1e-12);
    }
}
