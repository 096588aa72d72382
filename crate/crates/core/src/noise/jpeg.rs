//! JPEG degradation simulator: the lossy part of the codec (8-bit
//! quantization, blockwise 8x8 DCT, quantization-table rounding) without
//! entropy coding, which is lossless and does not change the noise
//! structure.

use crate::error::{Error, Result};
use crate::frame::Frame;

/// Standard luminance quantization table, row-major.
pub const BASE_LUMA_QTABLE: [u16; 64] = [
    16, 11, 10, 16, 24, 40, 51, 61, //
    12, 12, 14, 19, 26, 58, 60, 55, //
    14, 13, 16, 24, 40, 57, 69, 56, //
    14, 17, 22, 29, 51, 87, 80, 62, //
    18, 22, 37, 56, 68, 109, 103, 77, //
    24, 35, 55, 64, 81, 104, 113, 92, //
    49, 64, 78, 87, 103, 121, 120, 101, //
    72, 92, 95, 98, 112, 100, 103, 99,
];

/// Scales the base table by the IJG quality convention:
/// `scale = 5000/Q` for `Q < 50`, else `200 - 2Q`;
/// `entry = clamp(floor((base*scale + 50)/100), 1, 255)`.
pub fn quality_scaled_table(quality: u32) -> [u16; 64] {
    let q = quality.clamp(1, 100);
    let scale: u32 = if q < 50 { 5000 / q } else { 200 - 2 * q };
    let mut out = [0u16; 64];
    for (o, &b) in out.iter_mut().zip(BASE_LUMA_QTABLE.iter()) {
        *o = (((b as u32 * scale) + 50) / 100).clamp(1, 255) as u16;
    }
    out
}

/// Orthonormal 8-point DCT-II basis: `C[u][x] = a(u) cos((2x+1)u pi / 16)`.
fn dct_basis() -> [[f64; 8]; 8] {
    let mut c = [[0.0f64; 8]; 8];
    for u in 0..8 {
        let a = if u == 0 { (1.0f64 / 8.0).sqrt() } else { (2.0f64 / 8.0).sqrt() };
        for x in 0..8 {
            c[u][x] = a * ((2 * x + 1) as f64 * u as f64 * std::f64::consts::PI / 16.0).cos();
        }
    }
    c
}

/// 2-D DCT of an 8x8 block (`F = C B C^T`).
pub fn dct_8x8(block: &[f64; 64]) -> [f64; 64] {
    let c = dct_basis();
    let mut tmp = [0.0f64; 64];
    for u in 0..8 {
        for x in 0..8 {
            let mut s = 0.0;
            for y in 0..8 {
                s += c[u][y] * block[y * 8 + x];
            }
            tmp[u * 8 + x] = s;
        }
    }
    let mut out = [0.0f64; 64];
    for u in 0..8 {
        for v in 0..8 {
            let mut s = 0.0;
            for x in 0..8 {
                s += tmp[u * 8 + x] * c[v][x];
            }
            out[u * 8 + v] = s;
        }
    }
    out
}

/// Inverse of [`dct_8x8`] (`B = C^T F C`).
pub fn idct_8x8(coeffs: &[f64; 64]) -> [f64; 64] {
    let c = dct_basis();
    let mut tmp = [0.0f64; 64];
    for y in 0..8 {
        for v in 0..8 {
            let mut s = 0.0;
            for u in 0..8 {
                s += c[u][y] * coeffs[u * 8 + v];
            }
            tmp[y * 8 + v] = s;
        }
    }
    let mut out = [0.0f64; 64];
    for y in 0..8 {
        for x in 0..8 {
            let mut s = 0.0;
            for v in 0..8 {
                s += tmp[y * 8 + v] * c[v][x];
            }
            out[y * 8 + x] = s;
        }
    }
    out
}

/// Simulates JPEG compression loss: clip to `[0,1]`, quantize to 8 bits,
/// level-shift, blockwise DCT, divide by the quality-scaled luminance
/// table with round-to-nearest, dequantize, inverse DCT, and map back to
/// `[0,1]`. Edge blocks are padded by replication.
pub fn jpeg_degrade(u: &Frame, quality: u32) -> Result<Frame> {
    if !(1..=100).contains(&quality) {
        return Err(Error::InvalidConfig(format!(
            "JPEG quality must be in [1,100], got {quality}"
        )));
    }
    let table = quality_scaled_table(quality);
    let (h, w) = (u.h, u.w);
    let hb = h.div_ceil(8) * 8;
    let wb = w.div_ceil(8) * 8;

    // 8-bit quantized, level-shifted, edge-replicated working image
    let mut img = vec![0.0f64; hb * wb];
    for y in 0..hb {
        let sy = y.min(h - 1);
        for x in 0..wb {
            let sx = x.min(w - 1);
            let v = u.data[sy * w + sx].clamp(0.0, 1.0);
            let v8 = (v * 255.0).round() as f64;
            img[y * wb + x] = v8 - 128.0;
        }
    }

    let mut block = [0.0f64; 64];
    for by in (0..hb).step_by(8) {
        for bx in (0..wb).step_by(8) {
            for y in 0..8 {
                for x in 0..8 {
                    block[y * 8 + x] = img[(by + y) * wb + bx + x];
                }
            }
            let mut coeffs = dct_8x8(&block);
            for (cf, &q) in coeffs.iter_mut().zip(table.iter()) {
                let q = q as f64;
                *cf = (*cf / q).round() * q;
            }
            let rec = idct_8x8(&coeffs);
            for y in 0..8 {
                for x in 0..8 {
                    img[(by + y) * wb + bx + x] = rec[y * 8 + x];
                }
            }
        }
    }

    let mut out = Frame::zeros(h, w);
    for y in 0..h {
        for x in 0..w {
            let v = (img[y * wb + x] + 128.0) / 255.0;
            out.data[y * w + x] = v.clamp(0.0, 1.0) as f32;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dct_round_trip_is_tight() {
        let mut block = [0.0f64; 64];
        for (i, b) in block.iter_mut().enumerate() {
            *b = ((i * 37 + 11) % 256) as f64 - 128.0;
        }
        let rec = idct_8x8(&dct_8x8(&block));
        for (a, b) in block.iter().zip(rec.iter()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn quality_table_endpoints() {
        let q100 = quality_scaled_table(100);
        assert!(q100.iter().all(|&v| v == 1));
        let q50 = quality_scaled_table(50);
        assert_eq!(q50, BASE_LUMA_QTABLE);
        let q10 = quality_scaled_table(10);
        // scale 500: entries 5x the base, clamped to 255
        assert_eq!(q10[0], 80);
        assert_eq!(q10[63], 255);
    }

    #[test]
    fn constant_half_gray_survives_any_quality() {
        let u = Frame::filled(20, 19, 0.5);
        for q in [1, 10, 50, 100] {
            let f = jpeg_degrade(&u, q).unwrap();
            for &v in &f.data {
                assert!((v - 0.5).abs() <= 1.0 / 255.0, "quality {q}: {v}");
            }
        }
    }

    #[test]
    fn dequantized_coefficients_are_table_multiples() {
        let table = quality_scaled_table(35);
        let mut block = [0.0f64; 64];
        for (i, b) in block.iter_mut().enumerate() {
            *b = (((i * 97 + 13) % 256) as f64) - 128.0;
        }
        let mut coeffs = dct_8x8(&block);
        for (cf, &q) in coeffs.iter_mut().zip(table.iter()) {
            let q = q as f64;
            *cf = (*cf / q).round() * q;
            let ratio = *cf / q;
            assert!((ratio - ratio.round()).abs() < 1e-9);
        }
    }

    #[test]
    fn quality_100_nearly_lossless_on_8bit_exact_images() {
        // pseudo-random 8-bit-exact image
        let mut state = 0x12345678u64;
        let mut data = Vec::with_capacity(64 * 64);
        for _ in 0..64 * 64 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            data.push(((state >> 33) % 256) as f32 / 255.0);
        }
        let u = Frame::new(64, 64, data).unwrap();
        let f = jpeg_degrade(&u, 100).unwrap();
        let max_err = u
            .data
            .iter()
            .zip(&f.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f32, f32::max);
        assert!(max_err <= 2.0 / 255.0, "max error {max_err}");
    }

    #[test]
    fn low_quality_is_lossy() {
        let mut data = Vec::with_capacity(32 * 32);
        for y in 0..32 {
            for x in 0..32 {
                data.push(if (x / 2 + y / 2) % 2 == 0 { 0.2 } else { 0.8 });
            }
        }
        let u = Frame::new(32, 32, data).unwrap();
        let f = jpeg_degrade(&u, 10).unwrap();
        let mse: f64 = u
            .data
            .iter()
            .zip(&f.data)
            .map(|(a, b)| ((a - b) as f64).powi(2))
            .sum::<f64>()
            / 1024.0;
        assert!(mse > 1e-4, "quality 10 should visibly distort, mse {mse}");
    }
}
