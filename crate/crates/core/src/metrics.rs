//! Quality metrics.

use crate::error::{Error, Result};
use crate::frame::Frame;

/// PSNR is capped here to avoid infinities on identical frames.
pub const PSNR_CAP_DB: f64 = 99.0;

/// Peak signal-to-noise ratio in dB for signals with peak 1.0:
/// `-10 log10(MSE)`, capped at 99.0 (in particular when MSE < 1e-10).
/// The candidate may be unclipped; the reference is expected in `[0,1]`.
pub fn psnr(candidate: &Frame, reference: &Frame) -> Result<f64> {
    if !candidate.same_dims(reference) {
        return Err(Error::DimsMismatch {
            context: "psnr",
            a_h: candidate.h,
            a_w: candidate.w,
            b_h: reference.h,
            b_w: reference.w,
        });
    }
    let n = candidate.data.len() as f64;
    let mse: f64 = candidate
        .data
        .iter()
        .zip(&reference.data)
        .map(|(&a, &b)| {
            let d = (a - b) as f64;
            d * d
        })
        .sum::<f64>()
        / n;
    if mse < 1e-10 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((-10.0 * mse.log10()).min(PSNR_CAP_DB))
}

/// Mean and population standard deviation, handy for per-frame PSNR logs.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_frames_hit_cap() {
        let f = Frame::filled(8, 8, 0.3);
        assert_eq!(psnr(&f, &f).unwrap(), PSNR_CAP_DB);
    }

    #[test]
    fn uniform_offset_gives_closed_form() {
        let a = Frame::filled(16, 16, 0.5);
        let b = Frame::filled(16, 16, 0.6);
        // MSE = 0.01 -> 20 dB
        let p = psnr(&a, &b).unwrap();
        assert!((p - 20.0).abs() < 1e-4, "{p}");
    }

    #[test]
    fn symmetric_and_monotone() {
        let a = Frame::new(4, 4, (0..16).map(|i| i as f32 / 16.0).collect()).unwrap();
        let mut b = a.clone();
        for (i, v) in b.data.iter_mut().enumerate() {
            *v += if i % 2 == 0 { 0.05 } else { -0.03 };
        }
        assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());

        // scaling the error by s > 1 lowers PSNR by exactly 20 log10(s)
        let mut c = a.clone();
        for (cv, (av, bv)) in c.data.iter_mut().zip(a.data.iter().zip(&b.data)) {
            *cv = av + 2.0 * (bv - av);
        }
        let p1 = psnr(&b, &a).unwrap();
        let p2 = psnr(&c, &a).unwrap();
        assert!((p1 - p2 - 20.0 * 2.0f64.log10()).abs() < 1e-6);
    }

    #[test]
    fn dims_mismatch_rejected() {
        let a = Frame::zeros(4, 4);
        let b = Frame::zeros(4, 5);
        assert!(psnr(&a, &b).is_err());
    }
}
