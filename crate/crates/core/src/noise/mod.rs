//! Seeded synthesis of the supported corruption models and time-varying
//! noise schedules.
//!
//! Sigmas are stored on the `[0, 1]` intensity scale; the text format below
//! uses 8-bit units (`sigma=25` means `25/255`) to match the usual way
//! noise levels are quoted. Noisy values are not clipped except inside the
//! JPEG path, which is inherently 8-bit.
//!
//! # Text format
//!
//! Specs and schedules parse from whitespace- or comma-separated
//! `key=value` tokens (`#` starts a comment):
//!
//! ```text
//! mode=constant kind=awgn sigma=25
//! mode=ramp t_start=0 t_end=300 a.kind=awgn a.sigma=25 b.kind=awgn b.sigma=50
//! mode=switch at=200 a.kind=awgn a.sigma=50 b.kind=salt_pepper b.p=0.25
//! ```
//!
//! Kinds and their keys: `awgn(sigma)`, `mult(sigma)`,
//! `correlated(sigma, radius)`, `salt_pepper(p)`, `jpeg_awgn(sigma, quality)`.
//! A bare spec (no `mode=`) is accepted as a constant schedule.

pub mod jpeg;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::rng::{SeededRng, StreamPurpose};

/// A corruption process.
#[derive(Clone, Debug, PartialEq)]
pub enum NoiseSpec {
    /// Additive white Gaussian noise.
    Awgn { sigma: f32 },
    /// `f = u + r*u` with white Gaussian `r`.
    Multiplicative { sigma: f32 },
    /// AWGN convolved with an L2-normalized disk kernel; the marginal
    /// standard deviation stays `sigma`.
    Correlated { sigma: f32, disk_radius: f32 },
    /// Each pixel independently replaced by Uniform[0,1] with probability p.
    SaltPepper { p: f32 },
    /// AWGN followed by JPEG-style 8x8 DCT quantization at the given
    /// quality.
    JpegAwgn { sigma: f32, quality: u32 },
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        match *self {
            NoiseSpec::Awgn { sigma } | NoiseSpec::Multiplicative { sigma } => {
                if !(sigma >= 0.0) || !sigma.is_finite() {
                    return bad(format!("sigma must be >= 0, got {sigma}"));
                }
            }
            NoiseSpec::Correlated { sigma, disk_radius } => {
                if !(sigma >= 0.0) || !sigma.is_finite() {
                    return bad(format!("sigma must be >= 0, got {sigma}"));
                }
                if !(disk_radius > 0.0) || !disk_radius.is_finite() {
                    return bad(format!("disk radius must be positive, got {disk_radius}"));
                }
            }
            NoiseSpec::SaltPepper { p } => {
                if !(0.0..=1.0).contains(&p) {
                    return bad(format!("p must be in [0,1], got {p}"));
                }
            }
            NoiseSpec::JpegAwgn { sigma, quality } => {
                if !(sigma >= 0.0) || !sigma.is_finite() {
                    return bad(format!("sigma must be >= 0, got {sigma}"));
                }
                if !(1..=100).contains(&quality) {
                    return bad(format!("quality must be in [1,100], got {quality}"));
                }
            }
        }
        Ok(())
    }

    /// Compact human-readable label (8-bit sigma units), used in logs.
    pub fn label(&self) -> String {
        match *self {
            NoiseSpec::Awgn { sigma } => format!("awgn(sigma={:.2})", sigma * 255.0),
            NoiseSpec::Multiplicative { sigma } => format!("mult(sigma={:.2})", sigma * 255.0),
            NoiseSpec::Correlated { sigma, disk_radius } => {
                format!("correlated(sigma={:.2} radius={disk_radius})", sigma * 255.0)
            }
            NoiseSpec::SaltPepper { p } => format!("salt_pepper(p={p})"),
            NoiseSpec::JpegAwgn { sigma, quality } => {
                format!("jpeg_awgn(sigma={:.2} quality={quality})", sigma * 255.0)
            }
        }
    }

    fn kind_name(&self) -> &'static str {
        match self {
            NoiseSpec::Awgn { .. } => "awgn",
            NoiseSpec::Multiplicative { .. } => "mult",
            NoiseSpec::Correlated { .. } => "correlated",
            NoiseSpec::SaltPepper { .. } => "salt_pepper",
            NoiseSpec::JpegAwgn { .. } => "jpeg_awgn",
        }
    }

    /// The scalar a ramp interpolates (sigma, or p for salt-and-pepper).
    fn primary_scalar(&self) -> f32 {
        match *self {
            NoiseSpec::Awgn { sigma }
            | NoiseSpec::Multiplicative { sigma }
            | NoiseSpec::Correlated { sigma, .. }
            | NoiseSpec::JpegAwgn { sigma, .. } => sigma,
            NoiseSpec::SaltPepper { p } => p,
        }
    }

    fn with_primary_scalar(&self, v: f32) -> NoiseSpec {
        match *self {
            NoiseSpec::Awgn { .. } => NoiseSpec::Awgn { sigma: v },
            NoiseSpec::Multiplicative { .. } => NoiseSpec::Multiplicative { sigma: v },
            NoiseSpec::Correlated { disk_radius, .. } => NoiseSpec::Correlated {
                sigma: v,
                disk_radius,
            },
            NoiseSpec::SaltPepper { .. } => NoiseSpec::SaltPepper { p: v },
            NoiseSpec::JpegAwgn { quality, .. } => NoiseSpec::JpegAwgn { sigma: v, quality },
        }
    }
}

/// How the corruption evolves over the frame index.
#[derive(Clone, Debug, PartialEq)]
pub enum NoiseSchedule {
    Constant(NoiseSpec),
    /// Linearly interpolates the primary scalar between two specs of the
    /// same kind over `[t_start, t_end]`, clamped outside.
    LinearRamp {
        start: NoiseSpec,
        end: NoiseSpec,
        t_start: usize,
        t_end: usize,
    },
    /// `a` for `t < t_switch`, `b` afterwards.
    Switch {
        a: NoiseSpec,
        b: NoiseSpec,
        t_switch: usize,
    },
}

impl NoiseSchedule {
    pub fn validate(&self) -> Result<()> {
        match self {
            NoiseSchedule::Constant(s) => s.validate(),
            NoiseSchedule::LinearRamp {
                start,
                end,
                t_start,
                t_end,
            } => {
                start.validate()?;
                end.validate()?;
                if start.kind_name() != end.kind_name() {
                    return Err(Error::InvalidConfig(format!(
                        "ramp endpoints must share a kind, got {} and {}",
                        start.kind_name(),
                        end.kind_name()
                    )));
                }
                if t_end <= t_start {
                    return Err(Error::InvalidConfig(format!(
                        "ramp needs t_start < t_end, got {t_start}..{t_end}"
                    )));
                }
                Ok(())
            }
            NoiseSchedule::Switch { a, b, .. } => {
                a.validate()?;
                b.validate()
            }
        }
    }
}

/// Resolves the active spec at frame index `t`.
pub fn schedule_eval(schedule: &NoiseSchedule, t: usize) -> NoiseSpec {
    match schedule {
        NoiseSchedule::Constant(s) => s.clone(),
        NoiseSchedule::LinearRamp {
            start,
            end,
            t_start,
            t_end,
        } => {
            if t <= *t_start {
                start.clone()
            } else if t >= *t_end {
                end.clone()
            } else {
                let alpha = (t - t_start) as f32 / (t_end - t_start) as f32;
                let v = start.primary_scalar() * (1.0 - alpha) + end.primary_scalar() * alpha;
                start.with_primary_scalar(v)
            }
        }
        NoiseSchedule::Switch { a, b, t_switch } => {
            if t < *t_switch {
                a.clone()
            } else {
                b.clone()
            }
        }
    }
}

/// Corrupts a clean frame. Deterministic given `(rng.master, t)`; frames at
/// distinct indices use independent streams.
pub fn apply_noise(u: &Frame, spec: &NoiseSpec, rng: &SeededRng, t: usize) -> Result<Frame> {
    spec.validate()?;
    let mut stream = rng.stream(t as u64, StreamPurpose::CorruptFrame);
    Ok(match *spec {
        NoiseSpec::Awgn { sigma } => {
            if sigma == 0.0 {
                u.clone()
            } else {
                let normal = Normal::new(0.0f32, 1.0).unwrap();
                let data = u
                    .data
                    .iter()
                    .map(|&v| v + sigma * normal.sample(&mut stream))
                    .collect();
                Frame {
                    h: u.h,
                    w: u.w,
                    data,
                }
            }
        }
        NoiseSpec::Multiplicative { sigma } => {
            let normal = Normal::new(0.0f32, 1.0).unwrap();
            let data = u
                .data
                .iter()
                .map(|&v| v + v * sigma * normal.sample(&mut stream))
                .collect();
            Frame {
                h: u.h,
                w: u.w,
                data,
            }
        }
        NoiseSpec::Correlated { sigma, disk_radius } => {
            let field = correlated_noise(u.h, u.w, sigma, disk_radius, &mut stream);
            let data = u.data.iter().zip(&field).map(|(&v, &n)| v + n).collect();
            Frame {
                h: u.h,
                w: u.w,
                data,
            }
        }
        NoiseSpec::SaltPepper { p } => salt_pepper(u, p, &mut stream),
        NoiseSpec::JpegAwgn { sigma, quality } => {
            let normal = Normal::new(0.0f32, 1.0).unwrap();
            let noisy = Frame {
                h: u.h,
                w: u.w,
                data: u
                    .data
                    .iter()
                    .map(|&v| v + sigma * normal.sample(&mut stream))
                    .collect(),
            };
            jpeg::jpeg_degrade(&noisy, quality)?
        }
    })
}

/// Spatially correlated Gaussian noise: a white field convolved (with
/// periodic wrap) with the indicator of `|x| <= radius` on the integer
/// grid, L2-normalized, then scaled so the marginal std is `sigma`.
pub fn correlated_noise(
    h: usize,
    w: usize,
    sigma: f32,
    disk_radius: f32,
    rng: &mut impl Rng,
) -> Vec<f32> {
    let normal = Normal::new(0.0f32, 1.0).unwrap();
    let white: Vec<f32> = (0..h * w).map(|_| normal.sample(rng)).collect();

    let r = disk_radius.floor() as isize;
    let mut taps: Vec<(isize, isize)> = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if ((dy * dy + dx * dx) as f32) <= disk_radius * disk_radius {
                taps.push((dy, dx));
            }
        }
    }
    let wgt = sigma / (taps.len() as f32).sqrt();

    let mut out = vec![0.0f32; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0f32;
            for &(dy, dx) in &taps {
                let yy = (y as isize + dy).rem_euclid(h as isize) as usize;
                let xx = (x as isize + dx).rem_euclid(w as isize) as usize;
                acc += white[yy * w + xx];
            }
            out[y * w + x] = acc * wgt;
        }
    }
    out
}

/// Replaces each pixel independently with Uniform[0,1] with probability `p`.
pub fn salt_pepper(u: &Frame, p: f32, rng: &mut impl Rng) -> Frame {
    let data = u
        .data
        .iter()
        .map(|&v| {
            let z: f32 = rng.gen();
            if z < p {
                rng.gen::<f32>()
            } else {
                v
            }
        })
        .collect();
    Frame {
        h: u.h,
        w: u.w,
        data,
    }
}

pub use jpeg::{jpeg_degrade, quality_scaled_table};

fn parse_kv(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("");
        for token in line.split(|c: char| c.is_whitespace() || c == ',') {
            if token.is_empty() {
                continue;
            }
            let (k, v) = token
                .split_once('=')
                .ok_or_else(|| Error::SpecParse(format!("expected key=value, got `{token}`")))?;
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
    }
    Ok(out)
}

fn get<'a>(kv: &'a [(String, String)], key: &str) -> Option<&'a str> {
    kv.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

fn parse_f32(kv: &[(String, String)], key: &str) -> Result<f32> {
    let v = get(kv, key).ok_or_else(|| Error::SpecParse(format!("missing `{key}`")))?;
    v.parse::<f32>()
        .map_err(|_| Error::SpecParse(format!("`{key}` is not a number: {v}")))
}

fn parse_usize(kv: &[(String, String)], key: &str) -> Result<usize> {
    let v = get(kv, key).ok_or_else(|| Error::SpecParse(format!("missing `{key}`")))?;
    v.parse::<usize>()
        .map_err(|_| Error::SpecParse(format!("`{key}` is not an integer: {v}")))
}

fn spec_from_kv(kv: &[(String, String)], prefix: &str) -> Result<NoiseSpec> {
    let pick = |name: &str| format!("{prefix}{name}");
    let kind = get(kv, &pick("kind"))
        .ok_or_else(|| Error::SpecParse(format!("missing `{}kind`", prefix)))?;
    let spec = match kind {
        "awgn" => NoiseSpec::Awgn {
            sigma: parse_f32(kv, &pick("sigma"))? / 255.0,
        },
        "mult" | "multiplicative" => NoiseSpec::Multiplicative {
            sigma: parse_f32(kv, &pick("sigma"))? / 255.0,
        },
        "correlated" => NoiseSpec::Correlated {
            sigma: parse_f32(kv, &pick("sigma"))? / 255.0,
            disk_radius: get(kv, &pick("radius"))
                .map(|v| v.parse::<f32>().map_err(|_| Error::SpecParse(format!("bad radius {v}"))))
                .transpose()?
                .unwrap_or(2.0),
        },
        "salt_pepper" | "saltpepper" | "sp" => NoiseSpec::SaltPepper {
            p: parse_f32(kv, &pick("p"))?,
        },
        "jpeg_awgn" | "jpeg" => NoiseSpec::JpegAwgn {
            sigma: parse_f32(kv, &pick("sigma"))? / 255.0,
            quality: parse_usize(kv, &pick("quality"))? as u32,
        },
        other => return Err(Error::UnknownNoiseKind(other.to_string())),
    };
    spec.validate()?;
    Ok(spec)
}

/// Parses a single noise spec from `key=value` text (sigma in 8-bit units).
pub fn parse_spec(text: &str) -> Result<NoiseSpec> {
    let kv = parse_kv(text)?;
    spec_from_kv(&kv, "")
}

/// Parses a schedule from `key=value` text; see the module docs for the
/// format.
pub fn parse_schedule(text: &str) -> Result<NoiseSchedule> {
    let kv = parse_kv(text)?;
    let mode = get(&kv, "mode").unwrap_or("constant");
    let schedule = match mode {
        "constant" => NoiseSchedule::Constant(spec_from_kv(&kv, "")?),
        "ramp" => NoiseSchedule::LinearRamp {
            start: spec_from_kv(&kv, "a.")?,
            end: spec_from_kv(&kv, "b.")?,
            t_start: parse_usize(&kv, "t_start")?,
            t_end: parse_usize(&kv, "t_end")?,
        },
        "switch" => NoiseSchedule::Switch {
            a: spec_from_kv(&kv, "a.")?,
            b: spec_from_kv(&kv, "b.")?,
            t_switch: parse_usize(&kv, "at")?,
        },
        other => return Err(Error::SpecParse(format!("unknown mode `{other}`"))),
    };
    schedule.validate()?;
    Ok(schedule)
}
