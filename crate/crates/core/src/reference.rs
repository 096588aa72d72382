//! Slow, obviously-correct f64 reference implementations.
//!
//! These exist so the test suites can check the fast `f32` operators against
//! an independent route: direct-summation forwards evaluated in f64, plus a
//! central-difference gradient of any scalar function. Nothing here calls
//! into [`crate::ops`].

use crate::warp::OcclusionMask;

/// Direct 7-loop same-padding convolution in f64.
/// `input` is `[n, ic, h, w]`, `weights` `[oc, ic, k, k]`, `bias` `[oc]`.
pub fn conv2d_ref(
    input: &[f64],
    n: usize,
    ic: usize,
    h: usize,
    w: usize,
    weights: &[f64],
    oc: usize,
    k: usize,
    bias: &[f64],
) -> Vec<f64> {
    let pad = (k - 1) / 2;
    let mut out = vec![0.0f64; n * oc * h * w];
    for ni in 0..n {
        for oci in 0..oc {
            for oy in 0..h {
                for ox in 0..w {
                    let mut acc = bias[oci];
                    for ici in 0..ic {
                        for ky in 0..k {
                            for kx in 0..k {
                                let iy = oy as isize + ky as isize - pad as isize;
                                let ix = ox as isize + kx as isize - pad as isize;
                                if iy < 0 || iy >= h as isize || ix < 0 || ix >= w as isize {
                                    continue;
                                }
                                let iv = input[((ni * ic + ici) * h + iy as usize) * w + ix as usize];
                                let wv = weights[((oci * ic + ici) * k + ky) * k + kx];
                                acc += iv * wv;
                            }
                        }
                    }
                    out[((ni * oc + oci) * h + oy) * w + ox] = acc;
                }
            }
        }
    }
    out
}

/// Elementwise max(0, x).
pub fn relu_ref(input: &[f64]) -> Vec<f64> {
    input.iter().map(|&v| v.max(0.0)).collect()
}

/// Training-mode batch norm in f64: per-channel statistics over
/// (batch, row, col), biased variance, affine transform.
pub fn batch_norm_ref(
    input: &[f64],
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    gamma: &[f64],
    beta: &[f64],
    eps: f64,
) -> Vec<f64> {
    let mut out = vec![0.0f64; input.len()];
    let count = (n * h * w) as f64;
    for ci in 0..c {
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for ni in 0..n {
            for i in 0..h * w {
                let v = input[(ni * c + ci) * h * w + i];
                sum += v;
                sumsq += v * v;
            }
        }
        let mean = sum / count;
        let var = (sumsq / count - mean * mean).max(0.0);
        let istd = 1.0 / (var + eps).sqrt();
        for ni in 0..n {
            for i in 0..h * w {
                let idx = (ni * c + ci) * h * w + i;
                out[idx] = gamma[ci] * (input[idx] - mean) * istd + beta[ci];
            }
        }
    }
    out
}

/// Masked mean absolute error over all entries, mask broadcast over
/// (batch, channel). `None` counts everything.
pub fn masked_l1_ref(
    pred: &[f64],
    target: &[f64],
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    mask: Option<&OcclusionMask>,
) -> f64 {
    masked_ref(pred, target, n, c, h, w, mask, |d| d.abs())
}

/// Masked mean squared error; see [`masked_l1_ref`].
pub fn masked_l2_ref(
    pred: &[f64],
    target: &[f64],
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    mask: Option<&OcclusionMask>,
) -> f64 {
    masked_ref(pred, target, n, c, h, w, mask, |d| d * d)
}

#[allow(clippy::too_many_arguments)]
fn masked_ref(
    pred: &[f64],
    target: &[f64],
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    mask: Option<&OcclusionMask>,
    penalty: impl Fn(f64) -> f64,
) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for ni in 0..n {
        for ci in 0..c {
            for y in 0..h {
                for x in 0..w {
                    if let Some(m) = mask {
                        if !m.get(y, x) {
                            continue;
                        }
                    }
                    let i = ((ni * c + ci) * h + y) * w + x;
                    total += penalty(pred[i] - target[i]);
                    count += 1;
                }
            }
        }
    }
    total / count.max(1) as f64
}

/// Central-difference gradient of a scalar function of a flat f64 vector.
pub fn fd_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    let mut grad = Vec::with_capacity(x.len());
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + step;
        let fp = f(&probe);
        probe[i] = x[i] - step;
        let fm = f(&probe);
        probe[i] = x[i];
        grad.push((fp - fm) / (2.0 * step));
    }
    grad
}

/// Worst relative disagreement between an analytic f32 gradient and an f64
/// finite-difference gradient, with a small floor so near-zero entries are
/// compared absolutely.
pub fn max_rel_err(analytic: &[f32], fd: &[f64]) -> f64 {
    assert_eq!(analytic.len(), fd.len());
    let mut worst = 0.0f64;
    for (&a, &g) in analytic.iter().zip(fd) {
        let a = a as f64;
        let denom = a.abs().max(g.abs()).max(1e-4);
        worst = worst.max((a - g).abs() / denom);
    }
    worst
}

/// Deterministic pseudo-random f64s in (-1, 1) for building test instances
/// without touching the crate's seeded streams.
pub fn test_values(n: usize, seed: u64) -> Vec<f64> {
    let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15) | 1;
    (0..n)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
        .collect()
}
