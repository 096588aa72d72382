//! Model-blind video denoising toolkit.
//!
//! A small pretrained residual CNN is fine-tuned on a single noisy video by
//! treating motion-compensated consecutive frames as independent noisy
//! observations of the same signal (noise-to-noise supervision). The crate
//! bundles everything that pipeline needs:
//!
//! - [`tensor`] / [`ops`] / [`adam`] — a minimal reverse-mode differentiable
//!   operator set (convolution, batch norm, ReLU, masked losses) and Adam.
//! - [`model`] — a configurable DnCNN-style residual denoiser.
//! - [`flow`] — dual-based TV-L1 optical flow with a coarse-to-fine pyramid.
//! - [`warp`] — bilinear motion compensation and divergence-based occlusion
//!   masks, producing the training pairs.
//! - [`noise`] — seeded synthesis of the supported corruption models and
//!   time-varying noise schedules.
//! - [`train`] — pretraining, offline (whole-video) and online
//!   (frame-by-frame) fine-tuning, lifelong adaptation runs.
//! - [`pgm`] / [`csv`] / [`metrics`] — frame sequence I/O and PSNR logging.
//! - [`reference`] — slow, obviously-correct f64 reference implementations
//!   used by the test suites as independent oracles.

pub mod adam;
pub mod csv;
pub mod error;
pub mod flow;
pub mod frame;
pub mod metrics;
pub mod model;
pub mod noise;
pub mod ops;
pub mod pgm;
pub mod reference;
pub mod rng;
pub mod synth;
pub mod tensor;
pub mod train;
pub mod warp;

pub use error::{Error, Result};
pub use frame::{Frame, FrameSequence, RgbFrame};
pub use tensor::{Parameter, Tensor4};
