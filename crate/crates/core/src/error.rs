//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("dimension mismatch in {context}: {a_h}x{a_w} vs {b_h}x{b_w}")]
    DimsMismatch {
        context: &'static str,
        a_h: usize,
        a_w: usize,
        b_h: usize,
        b_w: usize,
    },

    #[error("length mismatch in {context}: {a} vs {b}")]
    LengthMismatch {
        context: &'static str,
        a: usize,
        b: usize,
    },

    #[error("non-finite values in {context}")]
    NonFinite { context: &'static str },

    #[error("numerical failure{}: {detail}", frame_suffix(.frame))]
    NumericalFailure { frame: Option<usize>, detail: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown noise kind `{0}`")]
    UnknownNoiseKind(String),

    #[error("cannot parse noise spec: {0}")]
    SpecParse(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed PGM/PPM header in {path}: {detail}")]
    PgmFormat { path: String, detail: String },

    #[error("frame {index} missing for pattern {pattern}")]
    MissingFrame { pattern: String, index: usize },

    #[error("no frames match pattern {0}")]
    EmptySequence(String),

    #[error("frame {index} has dims {got_h}x{got_w}, expected {exp_h}x{exp_w}")]
    InconsistentDims {
        index: usize,
        exp_h: usize,
        exp_w: usize,
        got_h: usize,
        got_w: usize,
    },

    #[error("empty training corpus")]
    EmptyCorpus,

    #[error("bad weights file magic (not a F2FW file)")]
    WeightsMagic,

    #[error("unsupported weights format version {0}")]
    WeightsVersion(u32),

    #[error("weights file truncated")]
    WeightsTruncated,

    #[error("weights file inconsistent with declared config: {0}")]
    WeightsShape(String),

    #[error("malformed flow file: {0}")]
    FloFormat(String),

    #[error("malformed CSV: {0}")]
    CsvFormat(String),
}

fn frame_suffix(frame: &Option<usize>) -> String {
    match frame {
        Some(t) => format!(" at frame {t}"),
        None => String::new(),
    }
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
