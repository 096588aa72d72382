//! Dual-based TV-L1 optical flow with a coarse-to-fine pyramid and iterative
//! warping.
//!
//! The solver minimizes `E(u) = sum |grad u| + |grad v| + lambda * sum |rho|`
//! where `rho` is the linearized brightness-constancy residual, via the
//! classic primal-dual scheme: pointwise thresholding on the data term and a
//! projected dual ascent on the TV term. Intensities are internally scaled
//! to `0..255`, so `lambda_data` follows the convention of the published
//! solvers. For noise robustness the flow is computed on a downscaled pair
//! (`prefilter_downscale`) and the result upsampled, with displacement
//! values scaled by the zoom factor.

use crate::error::{Error, Result};
use crate::frame::Frame;
use std::io::{Read, Write};

/// Dense displacement field: `u` horizontal (columns), `v` vertical (rows),
/// both in pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowField {
    pub h: usize,
    pub w: usize,
    pub u: Vec<f32>,
    pub v: Vec<f32>,
}

impl FlowField {
    pub fn zeros(h: usize, w: usize) -> Self {
        FlowField {
            h,
            w,
            u: vec![0.0; h * w],
            v: vec![0.0; h * w],
        }
    }

    pub fn constant(h: usize, w: usize, u: f32, v: f32) -> Self {
        FlowField {
            h,
            w,
            u: vec![u; h * w],
            v: vec![v; h * w],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(&self.v).all(|x| x.is_finite())
    }

    /// Mean Euclidean norm of the displacement vectors.
    pub fn mean_magnitude(&self) -> f64 {
        if self.u.is_empty() {
            return 0.0;
        }
        let s: f64 = self
            .u
            .iter()
            .zip(&self.v)
            .map(|(&a, &b)| ((a * a + b * b) as f64).sqrt())
            .sum();
        s / self.u.len() as f64
    }
}

/// TV-L1 solver parameters. All values are exposed; the defaults follow the
/// standard published settings for intensities in `0..255`.
#[derive(Clone, Copy, Debug)]
pub struct FlowConfig {
    /// Data attachment weight in `E = TV + lambda * sum |rho|`.
    pub lambda_data: f32,
    /// Coupling between the data and TV relaxations.
    pub theta_tv: f32,
    /// Dual ascent step, in `(0, 0.25]`.
    pub tau_pd: f32,
    /// Pyramid downscale factor, `0.5 <= s < 1`.
    pub pyramid_scale: f32,
    /// Number of pyramid levels; `None` picks the most levels keeping the
    /// coarsest minimum dimension at 16 or above.
    pub n_scales: Option<usize>,
    /// Outer warp iterations per level.
    pub n_warps: usize,
    /// Inner primal-dual iterations per warp.
    pub n_iters: usize,
    /// Extra integer coarsening of the input pair before solving; the flow
    /// is upsampled (and scaled) back to full resolution.
    pub prefilter_downscale: usize,
    /// Inner-loop stopping threshold on the mean squared flow update.
    pub stop_eps: f32,
    /// 3x3 median filtering of the flow after each warp iteration.
    pub median_filter: bool,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            lambda_data: 0.3,
            theta_tv: 0.3,
            tau_pd: 0.25,
            pyramid_scale: 0.5,
            n_scales: None,
            n_warps: 5,
            n_iters: 50,
            prefilter_downscale: 2,
            stop_eps: 0.01,
            median_filter: true,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.lambda_data > 0.0) {
            return bad(format!("lambda_data must be positive, got {}", self.lambda_data));
        }
        if !(self.theta_tv > 0.0) {
            return bad(format!("theta_tv must be positive, got {}", self.theta_tv));
        }
        if !(self.tau_pd > 0.0 && self.tau_pd <= 0.25) {
            return bad(format!("tau_pd must be in (0, 0.25], got {}", self.tau_pd));
        }
        if !(self.pyramid_scale >= 0.5 && self.pyramid_scale < 1.0) {
            return bad(format!(
                "pyramid_scale must be in [0.5, 1), got {}",
                self.pyramid_scale
            ));
        }
        if self.n_warps == 0 || self.n_iters == 0 {
            return bad("n_warps and n_iters must be at least 1".into());
        }
        if self.prefilter_downscale == 0 {
            return bad("prefilter_downscale must be at least 1".into());
        }
        if !(self.stop_eps > 0.0) {
            return bad(format!("stop_eps must be positive, got {}", self.stop_eps));
        }
        Ok(())
    }
}

const MIN_COARSE_DIM: usize = 16;

/// Separable Gaussian blur with border clamp; a non-positive sigma is a
/// no-op in that axis.
pub fn gaussian_blur(frame: &Frame, sigma_y: f32, sigma_x: f32) -> Frame {
    fn kernel(sigma: f32) -> Vec<f32> {
        let radius = (3.0 * sigma).ceil().max(1.0) as usize;
        let mut k = Vec::with_capacity(2 * radius + 1);
        let s2 = 2.0 * sigma * sigma;
        for i in -(radius as isize)..=(radius as isize) {
            k.push((-(i * i) as f32 / s2).exp());
        }
        let sum: f32 = k.iter().sum();
        k.iter_mut().for_each(|v| *v /= sum);
        k
    }

    let (h, w) = (frame.h, frame.w);
    let mut tmp = frame.data.clone();
    if sigma_x > 0.0 && w > 1 {
        let k = kernel(sigma_x);
        let r = k.len() / 2;
        for y in 0..h {
            let row = frame.row(y);
            for x in 0..w {
                let mut acc = 0.0f32;
                for (j, &kv) in k.iter().enumerate() {
                    let xx = (x as isize + j as isize - r as isize).clamp(0, w as isize - 1) as usize;
                    acc += kv * row[xx];
                }
                tmp[y * w + x] = acc;
            }
        }
    }
    let mut out = tmp.clone();
    if sigma_y > 0.0 && h > 1 {
        let k = kernel(sigma_y);
        let r = k.len() / 2;
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0f32;
                for (j, &kv) in k.iter().enumerate() {
                    let yy = (y as isize + j as isize - r as isize).clamp(0, h as isize - 1) as usize;
                    acc += kv * tmp[yy * w + x];
                }
                out[y * w + x] = acc;
            }
        }
    }
    Frame { h, w, data: out }
}

/// Bilinear resize with pixel-center alignment.
fn resize_bilinear(frame: &Frame, nh: usize, nw: usize) -> Frame {
    let mut out = Frame::zeros(nh, nw);
    let sy = frame.h as f32 / nh as f32;
    let sx = frame.w as f32 / nw as f32;
    for y in 0..nh {
        let py = (y as f32 + 0.5) * sy - 0.5;
        for x in 0..nw {
            let px = (x as f32 + 0.5) * sx - 0.5;
            out.data[y * nw + x] = frame.sample_clamped(py, px);
        }
    }
    out
}

/// Anti-aliased downscale: Gaussian smoothing matched to the zoom factor
/// followed by bilinear sampling.
pub fn zoom_out(frame: &Frame, nh: usize, nw: usize) -> Frame {
    let fy = nh as f32 / frame.h as f32;
    let fx = nw as f32 / frame.w as f32;
    let sig = |f: f32| if f < 1.0 { 0.6 * (1.0 / (f * f) - 1.0).sqrt() } else { 0.0 };
    let blurred = gaussian_blur(frame, sig(fy), sig(fx));
    resize_bilinear(&blurred, nh, nw)
}

/// Gaussian pyramid: level 0 is the input, level k+1 is the smoothed and
/// subsampled level k. Stops early if a level would degenerate below 2px.
pub fn build_pyramid(frame: &Frame, scale: f32, n_scales: usize) -> Vec<Frame> {
    let mut levels = Vec::with_capacity(n_scales.max(1));
    levels.push(frame.clone());
    for _ in 1..n_scales {
        let prev = levels.last().unwrap();
        let nh = ((prev.h as f32) * scale).round() as usize;
        let nw = ((prev.w as f32) * scale).round() as usize;
        if nh < 2 || nw < 2 {
            break;
        }
        levels.push(zoom_out(prev, nh, nw));
    }
    levels
}

/// Bilinear flow resize; displacement values are multiplied by the per-axis
/// dimension ratio so they stay in pixels of the new grid.
pub fn upsample_flow(flow: &FlowField, nh: usize, nw: usize) -> FlowField {
    let fu = Frame {
        h: flow.h,
        w: flow.w,
        data: flow.u.clone(),
    };
    let fv = Frame {
        h: flow.h,
        w: flow.w,
        data: flow.v.clone(),
    };
    let ru = nw as f32 / flow.w as f32;
    let rv = nh as f32 / flow.h as f32;
    let mut up = resize_bilinear(&fu, nh, nw);
    let mut vp = resize_bilinear(&fv, nh, nw);
    up.data.iter_mut().for_each(|x| *x *= ru);
    vp.data.iter_mut().for_each(|x| *x *= rv);
    FlowField {
        h: nh,
        w: nw,
        u: up.data,
        v: vp.data,
    }
}

fn median_filter_3x3(field: &mut Vec<f32>, h: usize, w: usize) {
    let src = field.clone();
    let mut win = [0.0f32; 9];
    for y in 0..h {
        for x in 0..w {
            let mut n = 0;
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    let yy = y as isize + dy;
                    let xx = x as isize + dx;
                    if yy >= 0 && yy < h as isize && xx >= 0 && xx < w as isize {
                        win[n] = src[yy as usize * w + xx as usize];
                        n += 1;
                    }
                }
            }
            let s = &mut win[..n];
            s.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
            field[y * w + x] = if n % 2 == 1 {
                s[n / 2]
            } else {
                0.5 * (s[n / 2 - 1] + s[n / 2])
            };
        }
    }
}

/// Central-difference gradient, one-sided at the borders.
fn centered_gradient(img: &Frame) -> (Vec<f32>, Vec<f32>) {
    let (h, w) = (img.h, img.w);
    let mut gx = vec![0.0f32; h * w];
    let mut gy = vec![0.0f32; h * w];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            gx[i] = if w == 1 {
                0.0
            } else if x == 0 {
                img.data[i + 1] - img.data[i]
            } else if x == w - 1 {
                img.data[i] - img.data[i - 1]
            } else {
                0.5 * (img.data[i + 1] - img.data[i - 1])
            };
            gy[i] = if h == 1 {
                0.0
            } else if y == 0 {
                img.data[i + w] - img.data[i]
            } else if y == h - 1 {
                img.data[i] - img.data[i - w]
            } else {
                0.5 * (img.data[i + w] - img.data[i - w])
            };
        }
    }
    (gx, gy)
}

const GRAD_EPS: f32 = 1e-10;

/// One pyramid level of the primal-dual TV-L1 iteration, updating `flow` in
/// place. `on_warp` is called after every outer warp iteration.
fn solve_level(
    i0: &Frame,
    i1: &Frame,
    flow: &mut FlowField,
    cfg: &FlowConfig,
    mut on_warp: Option<&mut dyn FnMut(usize, &FlowField)>,
) {
    let (h, w) = (i0.h, i0.w);
    let n = h * w;
    let (i1x, i1y) = centered_gradient(i1);
    let fx = Frame {
        h,
        w,
        data: i1x,
    };
    let fy = Frame {
        h,
        w,
        data: i1y,
    };

    let mut p11 = vec![0.0f32; n];
    let mut p12 = vec![0.0f32; n];
    let mut p21 = vec![0.0f32; n];
    let mut p22 = vec![0.0f32; n];

    let mut i1w = vec![0.0f32; n];
    let mut i1wx = vec![0.0f32; n];
    let mut i1wy = vec![0.0f32; n];
    let mut grad = vec![0.0f32; n];
    let mut rho_c = vec![0.0f32; n];

    let l_t = cfg.lambda_data * cfg.theta_tv;
    let taut = cfg.tau_pd / cfg.theta_tv;

    for warp in 0..cfg.n_warps {
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let px = x as f32 + flow.u[i];
                let py = y as f32 + flow.v[i];
                i1w[i] = i1.sample_clamped(py, px);
                i1wx[i] = fx.sample_clamped(py, px);
                i1wy[i] = fy.sample_clamped(py, px);
                grad[i] = i1wx[i] * i1wx[i] + i1wy[i] * i1wy[i];
                rho_c[i] = i1w[i] - i1wx[i] * flow.u[i] - i1wy[i] * flow.v[i] - i0.data[i];
            }
        }

        for _ in 0..cfg.n_iters {
            // data-term thresholding on the auxiliary flow
            let mut err = 0.0f64;
            let mut v1 = vec![0.0f32; n];
            let mut v2 = vec![0.0f32; n];
            for i in 0..n {
                let rho = rho_c[i] + i1wx[i] * flow.u[i] + i1wy[i] * flow.v[i];
                let (d1, d2) = if rho < -l_t * grad[i] {
                    (l_t * i1wx[i], l_t * i1wy[i])
                } else if rho > l_t * grad[i] {
                    (-l_t * i1wx[i], -l_t * i1wy[i])
                } else if grad[i] > GRAD_EPS {
                    let f = -rho / grad[i];
                    (f * i1wx[i], f * i1wy[i])
                } else {
                    (0.0, 0.0)
                };
                v1[i] = flow.u[i] + d1;
                v2[i] = flow.v[i] + d2;
            }
            // primal update: u = v + theta * div(p)
            for y in 0..h {
                for x in 0..w {
                    let i = y * w + x;
                    let div1 = if w == 1 {
                        0.0
                    } else if x == 0 {
                        p11[i]
                    } else if x == w - 1 {
                        -p11[i - 1]
                    } else {
                        p11[i] - p11[i - 1]
                    } + if h == 1 {
                        0.0
                    } else if y == 0 {
                        p12[i]
                    } else if y == h - 1 {
                        -p12[i - w]
                    } else {
                        p12[i] - p12[i - w]
                    };
                    let div2 = if w == 1 {
                        0.0
                    } else if x == 0 {
                        p21[i]
                    } else if x == w - 1 {
                        -p21[i - 1]
                    } else {
                        p21[i] - p21[i - 1]
                    } + if h == 1 {
                        0.0
                    } else if y == 0 {
                        p22[i]
                    } else if y == h - 1 {
                        -p22[i - w]
                    } else {
                        p22[i] - p22[i - w]
                    };
                    let nu = v1[i] + cfg.theta_tv * div1;
                    let nv = v2[i] + cfg.theta_tv * div2;
                    err += ((nu - flow.u[i]) as f64).powi(2) + ((nv - flow.v[i]) as f64).powi(2);
                    flow.u[i] = nu;
                    flow.v[i] = nv;
                }
            }
            // dual ascent with forward differences
            for y in 0..h {
                for x in 0..w {
                    let i = y * w + x;
                    let ux = if x < w - 1 { flow.u[i + 1] - flow.u[i] } else { 0.0 };
                    let uy = if y < h - 1 { flow.u[i + w] - flow.u[i] } else { 0.0 };
                    let vx = if x < w - 1 { flow.v[i + 1] - flow.v[i] } else { 0.0 };
                    let vy = if y < h - 1 { flow.v[i + w] - flow.v[i] } else { 0.0 };
                    let ng1 = 1.0 + taut * (ux * ux + uy * uy).sqrt();
                    p11[i] = (p11[i] + taut * ux) / ng1;
                    p12[i] = (p12[i] + taut * uy) / ng1;
                    let ng2 = 1.0 + taut * (vx * vx + vy * vy).sqrt();
                    p21[i] = (p21[i] + taut * vx) / ng2;
                    p22[i] = (p22[i] + taut * vy) / ng2;
                }
            }
            if err / n as f64 <= (cfg.stop_eps as f64).powi(2) {
                break;
            }
        }

        if cfg.median_filter {
            median_filter_3x3(&mut flow.u, h, w);
            median_filter_3x3(&mut flow.v, h, w);
        }
        if let Some(cb) = on_warp.as_deref_mut() {
            cb(warp, flow);
        }
    }
}

fn auto_n_scales(h: usize, w: usize, scale: f32, requested: Option<usize>) -> usize {
    let mut n = 1usize;
    let mut mh = h as f32;
    let mut mw = w as f32;
    loop {
        let nh = (mh * scale).round();
        let nw = (mw * scale).round();
        if nh.min(nw) < MIN_COARSE_DIM as f32 {
            break;
        }
        n += 1;
        mh = nh;
        mw = nw;
    }
    match requested {
        Some(r) => r.clamp(1, n),
        None => n,
    }
}

fn scale_to_255(frame: &Frame) -> Frame {
    Frame {
        h: frame.h,
        w: frame.w,
        data: frame.data.iter().map(|&v| v * 255.0).collect(),
    }
}

/// Estimates the flow from `target` to `reference`, i.e. a field `v` with
/// `reference(x + v(x)) ~ target(x)` wherever brightness constancy holds.
pub fn tvl1_flow(target: &Frame, reference: &Frame, cfg: &FlowConfig) -> Result<FlowField> {
    tvl1_flow_traced(target, reference, cfg, None)
}

/// As [`tvl1_flow`], with a per-warp callback `(level, warp, flow)` for
/// diagnostics; the callback sees the flow at the working resolution.
pub fn tvl1_flow_traced(
    target: &Frame,
    reference: &Frame,
    cfg: &FlowConfig,
    mut on_warp: Option<&mut dyn FnMut(usize, usize, &FlowField)>,
) -> Result<FlowField> {
    cfg.validate()?;
    if !target.same_dims(reference) {
        return Err(Error::DimsMismatch {
            context: "tvl1_flow",
            a_h: target.h,
            a_w: target.w,
            b_h: reference.h,
            b_w: reference.w,
        });
    }
    let (full_h, full_w) = (target.h, target.w);
    let mut i0 = scale_to_255(target);
    let mut i1 = scale_to_255(reference);

    let d = cfg.prefilter_downscale;
    if d > 1 {
        let nh = ((full_h as f32 / d as f32).round() as usize).max(4);
        let nw = ((full_w as f32 / d as f32).round() as usize).max(4);
        i0 = zoom_out(&i0, nh, nw);
        i1 = zoom_out(&i1, nh, nw);
    }

    let n_scales = auto_n_scales(i0.h, i0.w, cfg.pyramid_scale, cfg.n_scales);
    let pyr0 = build_pyramid(&i0, cfg.pyramid_scale, n_scales);
    let pyr1 = build_pyramid(&i1, cfg.pyramid_scale, n_scales);
    let levels = pyr0.len();

    let coarsest = &pyr0[levels - 1];
    let mut flow = FlowField::zeros(coarsest.h, coarsest.w);
    for lvl in (0..levels).rev() {
        let l0 = &pyr0[lvl];
        let l1 = &pyr1[lvl];
        if flow.h != l0.h || flow.w != l0.w {
            flow = upsample_flow(&flow, l0.h, l0.w);
        }
        match on_warp.as_deref_mut() {
            Some(cb) => {
                let mut hook = |warp: usize, f: &FlowField| cb(lvl, warp, f);
                solve_level(l0, l1, &mut flow, cfg, Some(&mut hook));
            }
            None => solve_level(l0, l1, &mut flow, cfg, None),
        }
    }

    if flow.h != full_h || flow.w != full_w {
        flow = upsample_flow(&flow, full_h, full_w);
    }
    Ok(flow)
}

/// TV-L1 energy of a flow field for a frame pair, using the solver's
/// conventions (0..255 intensity scale, forward-difference TV, bilinear
/// warping with border clamp): `sum |grad u| + |grad v| + lambda |rho|`.
pub fn tvl1_energy(target: &Frame, reference: &Frame, flow: &FlowField, lambda: f32) -> f64 {
    let i0 = scale_to_255(target);
    let i1 = scale_to_255(reference);
    let (h, w) = (i0.h, i0.w);
    let mut tv = 0.0f64;
    let mut data = 0.0f64;
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let ux = if x < w - 1 { flow.u[i + 1] - flow.u[i] } else { 0.0 };
            let uy = if y < h - 1 { flow.u[i + w] - flow.u[i] } else { 0.0 };
            let vx = if x < w - 1 { flow.v[i + 1] - flow.v[i] } else { 0.0 };
            let vy = if y < h - 1 { flow.v[i + w] - flow.v[i] } else { 0.0 };
            tv += ((ux * ux + uy * uy) as f64).sqrt() + ((vx * vx + vy * vy) as f64).sqrt();
            let warped = i1.sample_clamped(y as f32 + flow.v[i], x as f32 + flow.u[i]);
            data += (warped - i0.data[i]).abs() as f64;
        }
    }
    tv + lambda as f64 * data
}

const FLO_MAGIC: f32 = 202021.25;

/// Writes a flow field in the Middlebury `.flo` layout: float magic, then
/// `width`/`height` as little-endian i32, then row-major interleaved (u, v)
/// f32 pairs.
pub fn write_flo(flow: &FlowField, path: &std::path::Path) -> Result<()> {
    let mut buf = Vec::with_capacity(12 + flow.u.len() * 8);
    buf.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    buf.extend_from_slice(&(flow.w as i32).to_le_bytes());
    buf.extend_from_slice(&(flow.h as i32).to_le_bytes());
    for i in 0..flow.u.len() {
        buf.extend_from_slice(&flow.u[i].to_le_bytes());
        buf.extend_from_slice(&flow.v[i].to_le_bytes());
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    f.write_all(&buf)
        .map_err(|e| Error::io(path.display().to_string(), e))
}

/// Reads a Middlebury `.flo` file written by [`write_flo`].
pub fn read_flo(path: &std::path::Path) -> Result<FlowField> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    if bytes.len() < 12 {
        return Err(Error::FloFormat("file shorter than header".into()));
    }
    let magic = f32::from_le_bytes(bytes[0..4].try_into().unwrap());
    if magic != FLO_MAGIC {
        return Err(Error::FloFormat(format!("bad magic {magic}")));
    }
    let w = i32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let h = i32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if w <= 0 || h <= 0 {
        return Err(Error::FloFormat(format!("bad dims {w}x{h}")));
    }
    let (w, h) = (w as usize, h as usize);
    let need = 12 + w * h * 8;
    if bytes.len() != need {
        return Err(Error::FloFormat(format!(
            "expected {need} bytes for {w}x{h}, got {}",
            bytes.len()
        )));
    }
    let mut flow = FlowField::zeros(h, w);
    for i in 0..h * w {
        let off = 12 + i * 8;
        flow.u[i] = f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
        flow.v[i] = f32::from_le_bytes(bytes[off + 4..off + 8].try_into().unwrap());
    }
    Ok(flow)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pyramid_sizes_and_trivial_cases() {
        let f = Frame::zeros(64, 64);
        let p = build_pyramid(&f, 0.5, 3);
        assert_eq!(p.len(), 3);
        assert_eq!((p[0].h, p[0].w), (64, 64));
        assert_eq!((p[1].h, p[1].w), (32, 32));
        assert_eq!((p[2].h, p[2].w), (16, 16));

        let one = build_pyramid(&f, 0.5, 1);
        assert_eq!(one.len(), 1);
        assert_eq!(one[0], f);
    }

    #[test]
    fn pyramid_preserves_constants() {
        let f = Frame::filled(40, 56, 0.37);
        for lvl in build_pyramid(&f, 0.5, 3) {
            for &v in &lvl.data {
                assert!((v - 0.37).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn upsample_flow_scaling_rule() {
        let flow = FlowField::constant(8, 8, 1.0, 0.0);
        let up = upsample_flow(&flow, 16, 16);
        for i in 0..up.u.len() {
            assert!((up.u[i] - 2.0).abs() < 1e-6);
            assert_eq!(up.v[i], 0.0);
        }
        // identical dims -> unchanged
        let same = upsample_flow(&flow, 8, 8);
        assert_eq!(same, flow);
    }

    #[test]
    fn upsample_round_trip_is_tight_on_smooth_flow() {
        let mut flow = FlowField::zeros(32, 32);
        for y in 0..32 {
            for x in 0..32 {
                let i = y * 32 + x;
                flow.u[i] = (x as f32 / 31.0) * 2.0 - 1.0;
                flow.v[i] = ((y as f32 / 31.0) * std::f32::consts::PI).sin();
            }
        }
        let up = upsample_flow(&flow, 64, 64);
        let back = upsample_flow(&up, 32, 32);
        let mut max_dev = 0.0f32;
        for i in 0..flow.u.len() {
            max_dev = max_dev.max((back.u[i] - flow.u[i]).abs());
            max_dev = max_dev.max((back.v[i] - flow.v[i]).abs());
        }
        assert!(max_dev < 0.1, "max deviation {max_dev}");
    }

    #[test]
    fn constant_frames_give_zero_flow() {
        let a = Frame::filled(48, 48, 0.6);
        let b = Frame::filled(48, 48, 0.6);
        let cfg = FlowConfig::default();
        let flow = tvl1_flow(&a, &b, &cfg).unwrap();
        assert!(flow.mean_magnitude() < cfg.stop_eps as f64);
    }

    #[test]
    fn flo_round_trip(){
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.flo");
        let mut flow = FlowField::zeros(5, 7);
        for i in 0..35 {
            flow.u[i] = i as f32 * 0.25 - 3.0;
            flow.v[i] = (i as f32).sin();
        }
        write_flo(&flow, &path).unwrap();
        let back = read_flo(&path).unwrap();
        assert_eq!(flow, back);
    }

    #[test]
    fn flo_rejects_bad_magic_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.flo");
        std::fs::write(&path, [0u8; 11]).unwrap();
        assert!(matches!(read_flo(&path), Err(Error::FloFormat(_))));
        let mut buf = Vec::new();
        buf.extend_from_slice(&1.0f32.to_le_bytes());
        buf.extend_from_slice(&[0u8; 8]);
        std::fs::write(&path, &buf).unwrap();
        assert!(matches!(read_flo(&path), Err(Error::FloFormat(_))));
    }
}
