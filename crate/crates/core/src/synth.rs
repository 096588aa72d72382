//! Procedural clean images and videos for experiments and tests: smooth
//! multi-octave value noise with an optional drifting window and a moving
//! foreground blob, so sequences have real motion and occlusion boundaries
//! without any external data.

use rand::Rng;

use crate::frame::{Frame, FrameSequence};
use crate::rng::{SeededRng, StreamPurpose};

fn value_noise(h: usize, w: usize, rng: &mut impl Rng, base_cell: usize, octaves: usize) -> Frame {
    let mut out = Frame::zeros(h, w);
    let mut amplitude = 1.0f32;
    let mut cell = base_cell.max(2);
    for _ in 0..octaves {
        let gh = h.div_ceil(cell) + 2;
        let gw = w.div_ceil(cell) + 2;
        let grid: Vec<f32> = (0..gh * gw).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
        for y in 0..h {
            let gy = y as f32 / cell as f32;
            let y0 = gy.floor() as usize;
            let fy = gy - y0 as f32;
            let sy = fy * fy * (3.0 - 2.0 * fy);
            for x in 0..w {
                let gx = x as f32 / cell as f32;
                let x0 = gx.floor() as usize;
                let fx = gx - x0 as f32;
                let sx = fx * fx * (3.0 - 2.0 * fx);
                let v00 = grid[y0 * gw + x0];
                let v01 = grid[y0 * gw + x0 + 1];
                let v10 = grid[(y0 + 1) * gw + x0];
                let v11 = grid[(y0 + 1) * gw + x0 + 1];
                let top = v00 + sx * (v01 - v00);
                let bot = v10 + sx * (v11 - v10);
                out.data[y * w + x] += amplitude * (top + sy * (bot - top));
            }
        }
        amplitude *= 0.55;
        cell = (cell / 2).max(2);
    }
    out
}

fn normalize_to(frame: &mut Frame, lo: f32, hi: f32) {
    let mut min = f32::INFINITY;
    let mut max = f32::NEG_INFINITY;
    for &v in &frame.data {
        min = min.min(v);
        max = max.max(v);
    }
    let span = (max - min).max(1e-6);
    for v in frame.data.iter_mut() {
        *v = lo + (hi - lo) * (*v - min) / span;
    }
}

/// One smooth textured image with values in `[lo, hi]`.
pub fn synth_image(h: usize, w: usize, seed: u64, lo: f32, hi: f32) -> Frame {
    let streams = SeededRng::new(seed);
    let mut rng = streams.stream(0, StreamPurpose::Synth);
    let mut f = value_noise(h, w, &mut rng, 16, 4);
    normalize_to(&mut f, lo, hi);
    f
}

/// A corpus of independent images sharing dimensions.
pub fn synth_corpus(count: usize, h: usize, w: usize, seed: u64, lo: f32, hi: f32) -> FrameSequence {
    let streams = SeededRng::new(seed);
    let frames = (0..count)
        .map(|i| {
            let mut rng = streams.stream(i as u64, StreamPurpose::Synth);
            let mut f = value_noise(h, w, &mut rng, 16, 4);
            normalize_to(&mut f, lo, hi);
            f
        })
        .collect();
    FrameSequence::from_frames(frames).expect("equal dims by construction")
}

/// A clean video: a drifting textured background (subpixel motion of
/// `drift` = (dx, dy) pixels per frame) with a smooth foreground blob
/// moving against the drift, creating occlusion boundaries.
pub fn synth_video(
    frames: usize,
    h: usize,
    w: usize,
    seed: u64,
    drift: (f32, f32),
    lo: f32,
    hi: f32,
) -> FrameSequence {
    let streams = SeededRng::new(seed);
    let mut rng = streams.stream(u64::MAX, StreamPurpose::Synth);

    let total_dx = drift.0 * frames as f32;
    let total_dy = drift.1 * frames as f32;
    let margin_x = total_dx.abs().ceil() as usize + 4;
    let margin_y = total_dy.abs().ceil() as usize + 4;
    let mut canvas = value_noise(h + 2 * margin_y, w + 2 * margin_x, &mut rng, 16, 4);
    normalize_to(&mut canvas, lo, hi);

    // foreground blob path and look
    let blob_r = (h.min(w) as f32) * 0.18;
    let blob_val: f32 = rng.gen_range(lo..hi);
    let bx0 = rng.gen_range(0.3..0.7) * w as f32;
    let by0 = rng.gen_range(0.3..0.7) * h as f32;
    let bvx = -drift.0 * 1.8 - 0.2;
    let bvy = -drift.1 * 1.8 + 0.15;

    let mut out = Vec::with_capacity(frames);
    for t in 0..frames {
        let ox = margin_x as f32 + drift.0 * t as f32;
        let oy = margin_y as f32 + drift.1 * t as f32;
        let mut frame = Frame::zeros(h, w);
        for y in 0..h {
            for x in 0..w {
                frame.data[y * w + x] = canvas.sample_clamped(y as f32 + oy, x as f32 + ox);
            }
        }
        // wrap the blob path inside the frame box
        let span_x = (w as f32) + 2.0 * blob_r;
        let span_y = (h as f32) + 2.0 * blob_r;
        let bx = (bx0 + bvx * t as f32 + blob_r).rem_euclid(span_x) - blob_r;
        let by = (by0 + bvy * t as f32 + blob_r).rem_euclid(span_y) - blob_r;
        for y in 0..h {
            for x in 0..w {
                let d2 = (x as f32 - bx).powi(2) + (y as f32 - by).powi(2);
                let alpha = (-d2 / (0.5 * blob_r * blob_r)).exp();
                let i = y * w + x;
                frame.data[i] = frame.data[i] * (1.0 - alpha) + blob_val * alpha;
            }
        }
        out.push(frame);
    }
    FrameSequence::from_frames(out).expect("equal dims by construction")
}
