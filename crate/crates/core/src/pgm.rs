//! PGM/PPM frame I/O, sequence loading by filename pattern, and the
//! grayscale preparation step.
//!
//! Frames are stored as binary PGM (`P5`), maxval 255 or 65535 (16-bit
//! samples big-endian, per the format). Loading maps to `[0,1]` by
//! `value / maxval`; saving inverts with round-half-away-from-zero and
//! clamps to the representable range.

use crate::error::{Error, Result};
use crate::frame::{Frame, FrameSequence, RgbFrame};
use std::io::{Read, Write};
use std::path::Path;

/// Output sample depth for PGM writing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PgmDepth {
    Eight,
    Sixteen,
}

impl PgmDepth {
    fn maxval(self) -> u32 {
        match self {
            PgmDepth::Eight => 255,
            PgmDepth::Sixteen => 65535,
        }
    }
}

struct HeaderParser<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a str,
}

impl<'a> HeaderParser<'a> {
    fn err(&self, detail: impl Into<String>) -> Error {
        Error::PgmFormat {
            path: self.path.to_string(),
            detail: detail.into(),
        }
    }

    /// Skips whitespace and `#` comments between header tokens.
    fn skip_separators(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<&'a [u8]> {
        self.skip_separators();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("unexpected end of header"));
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        let tok = self.token()?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse::<u32>().ok())
            .ok_or_else(|| self.err(format!("invalid {what}")))
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(bytes)
}

fn parse_header<'a>(
    bytes: &'a [u8],
    path: &'a str,
    magic: &str,
) -> Result<(usize, usize, u32, usize)> {
    let mut p = HeaderParser { bytes, pos: 0, path };
    let m = p.token()?;
    if m != magic.as_bytes() {
        return Err(p.err(format!(
            "expected {magic}, got {:?}",
            String::from_utf8_lossy(m)
        )));
    }
    let w = p.number("width")? as usize;
    let h = p.number("height")? as usize;
    let maxval = p.number("maxval")?;
    if w == 0 || h == 0 {
        return Err(p.err("zero dimension"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(p.err(format!("unsupported maxval {maxval}")));
    }
    // exactly one whitespace byte before the raster
    if p.pos >= bytes.len() || !bytes[p.pos].is_ascii_whitespace() {
        return Err(p.err("missing raster separator"));
    }
    Ok((h, w, maxval, p.pos + 1))
}

/// Reads a binary PGM (`P5`) into a `[0,1]` frame.
pub fn read_pgm(path: &Path) -> Result<Frame> {
    let bytes = read_file(path)?;
    let pstr = path.display().to_string();
    let (h, w, maxval, data_off) = parse_header(&bytes, &pstr, "P5")?;
    let wide = maxval > 255;
    let need = h * w * if wide { 2 } else { 1 };
    let raster = &bytes[data_off.min(bytes.len())..];
    if raster.len() < need {
        return Err(Error::PgmFormat {
            path: pstr,
            detail: format!("raster truncated: need {need} bytes, have {}", raster.len()),
        });
    }
    let scale = 1.0 / maxval as f32;
    let data: Vec<f32> = if wide {
        raster[..need]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f32 * scale)
            .collect()
    } else {
        raster[..need].iter().map(|&b| b as f32 * scale).collect()
    };
    Frame::new(h, w, data)
}

/// Writes a frame as binary PGM, clamping to `[0,1]` and rounding
/// half-away-from-zero to the sample grid.
pub fn write_pgm(frame: &Frame, path: &Path, depth: PgmDepth) -> Result<()> {
    let maxval = depth.maxval();
    let mut buf = Vec::with_capacity(32 + frame.data.len() * 2);
    write!(&mut buf, "P5\n{} {}\n{}\n", frame.w, frame.h, maxval).unwrap();
    let mv = maxval as f32;
    match depth {
        PgmDepth::Eight => {
            for &v in &frame.data {
                let q = (v * mv).round().clamp(0.0, mv) as u8;
                buf.push(q);
            }
        }
        PgmDepth::Sixteen => {
            for &v in &frame.data {
                let q = (v * mv).round().clamp(0.0, mv) as u16;
                buf.extend_from_slice(&q.to_be_bytes());
            }
        }
    }
    std::fs::write(path, &buf).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Reads a binary PPM (`P6`), 8- or 16-bit, into RGB planes in `[0,1]`.
pub fn read_ppm(path: &Path) -> Result<RgbFrame> {
    let bytes = read_file(path)?;
    let pstr = path.display().to_string();
    let (h, w, maxval, data_off) = parse_header(&bytes, &pstr, "P6")?;
    let wide = maxval > 255;
    let need = h * w * 3 * if wide { 2 } else { 1 };
    let raster = &bytes[data_off.min(bytes.len())..];
    if raster.len() < need {
        return Err(Error::PgmFormat {
            path: pstr,
            detail: format!("raster truncated: need {need} bytes, have {}", raster.len()),
        });
    }
    let scale = 1.0 / maxval as f32;
    let mut rgb = RgbFrame {
        h,
        w,
        r: Vec::with_capacity(h * w),
        g: Vec::with_capacity(h * w),
        b: Vec::with_capacity(h * w),
    };
    if wide {
        for c in raster[..need].chunks_exact(6) {
            rgb.r.push(u16::from_be_bytes([c[0], c[1]]) as f32 * scale);
            rgb.g.push(u16::from_be_bytes([c[2], c[3]]) as f32 * scale);
            rgb.b.push(u16::from_be_bytes([c[4], c[5]]) as f32 * scale);
        }
    } else {
        for c in raster[..need].chunks_exact(3) {
            rgb.r.push(c[0] as f32 * scale);
            rgb.g.push(c[1] as f32 * scale);
            rgb.b.push(c[2] as f32 * scale);
        }
    }
    Ok(rgb)
}

/// Expands a printf-style pattern (`%d` or zero-padded `%0Nd`) with a frame
/// index. Exactly one specifier is required.
pub fn format_pattern(pattern: &str, index: usize) -> Result<String> {
    let Some(start) = pattern.find('%') else {
        return Err(Error::InvalidConfig(format!(
            "pattern `{pattern}` has no %d / %0Nd frame index specifier"
        )));
    };
    let rest = &pattern[start + 1..];
    let (formatted, spec_len) = if let Some(stripped) = rest.strip_prefix('d') {
        let _ = stripped;
        (format!("{index}"), 1)
    } else if rest.starts_with('0') {
        let digits: String = rest[1..].chars().take_while(|c| c.is_ascii_digit()).collect();
        let after = &rest[1 + digits.len()..];
        if digits.is_empty() || !after.starts_with('d') {
            return Err(Error::InvalidConfig(format!("bad specifier in `{pattern}`")));
        }
        let width: usize = digits.parse().unwrap();
        (format!("{index:0width$}"), 1 + digits.len() + 1)
    } else {
        return Err(Error::InvalidConfig(format!("bad specifier in `{pattern}`")));
    };
    let tail = &pattern[start + 1 + spec_len..];
    if tail.contains('%') {
        return Err(Error::InvalidConfig(format!(
            "pattern `{pattern}` has more than one specifier"
        )));
    }
    Ok(format!("{}{}{}", &pattern[..start], formatted, tail))
}

/// Loads a 1-based contiguous frame sequence. Stops at the first missing
/// index; reports a distinct error if a later frame exists past a gap, and
/// an empty-sequence error when frame 1 is absent.
pub fn load_sequence(pattern: &str) -> Result<FrameSequence> {
    let mut frames = Vec::new();
    let mut t = 1usize;
    loop {
        let path = format_pattern(pattern, t)?;
        let p = Path::new(&path);
        if !p.exists() {
            break;
        }
        let frame = read_pgm(p)?;
        if let Some(first) = frames.first() {
            let first: &Frame = first;
            if frame.h != first.h || frame.w != first.w {
                return Err(Error::InconsistentDims {
                    index: t,
                    exp_h: first.h,
                    exp_w: first.w,
                    got_h: frame.h,
                    got_w: frame.w,
                });
            }
        }
        frames.push(frame);
        t += 1;
    }
    if frames.is_empty() {
        return Err(Error::EmptySequence(pattern.to_string()));
    }
    // a file for t+1 existing past the stop marks a gap at t
    let next = format_pattern(pattern, t + 1)?;
    if Path::new(&next).exists() {
        return Err(Error::MissingFrame {
            pattern: pattern.to_string(),
            index: t,
        });
    }
    FrameSequence::from_frames(frames)
}

/// Saves a sequence with 1-based indices expanded into the pattern.
pub fn save_sequence(seq: &FrameSequence, pattern: &str, depth: PgmDepth) -> Result<()> {
    for (i, frame) in seq.iter().enumerate() {
        let path = format_pattern(pattern, i + 1)?;
        write_pgm(frame, Path::new(&path), depth)?;
    }
    Ok(())
}

/// Grayscale preparation: per-pixel mean of the three channels, then 2x
/// downscale by 2x2 box averaging (trailing row/column dropped for odd
/// dims).
pub fn prepare_frame(rgb: &RgbFrame) -> Frame {
    let (h, w) = (rgb.h, rgb.w);
    let mut gray = vec![0.0f32; h * w];
    for i in 0..h * w {
        gray[i] = (rgb.r[i] + rgb.g[i] + rgb.b[i]) / 3.0;
    }
    let oh = h / 2;
    let ow = w / 2;
    let mut out = Frame::zeros(oh, ow);
    for y in 0..oh {
        for x in 0..ow {
            let i = 2 * y * w + 2 * x;
            out.data[y * ow + x] = 0.25 * (gray[i] + gray[i + 1] + gray[i + w] + gray[i + w + 1]);
        }
    }
    out
}

/// Applies [`prepare_frame`] to a color sequence.
pub fn prepare_sequence(frames: &[RgbFrame]) -> Result<FrameSequence> {
    FrameSequence::from_frames(frames.iter().map(prepare_frame).collect())
}
