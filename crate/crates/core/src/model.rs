//! Configurable residual denoiser: a stack of same-size convolutional
//! layers predicting the noise residual of the input frame.
//!
//! Layout: first layer conv+ReLU, middle layers conv(+batch norm)+ReLU,
//! last layer conv only. The denoised image is `input - residual` when the
//! residual flag is on, otherwise the network output directly.

use rand::Rng;
use rand_distr::Normal;

use crate::adam;
use crate::adam::AdamState;
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::ops::{self, BnCache};
use crate::rng::{SeededRng, StreamPurpose};
use crate::tensor::{Parameter, Tensor4};
use std::io::{BufReader, BufWriter, Read, Write};

pub const BN_EPS: f32 = 1e-5;
pub const BN_MOMENTUM: f32 = 0.1;

/// Architecture description.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    /// Number of convolutional layers (at least 3).
    pub depth: usize,
    /// Feature maps in the hidden layers.
    pub width: usize,
    /// Odd kernel size.
    pub kernel: usize,
    /// Batch normalization in the middle layers.
    pub use_norm: bool,
    /// Predict the residual (denoised = input - output) rather than the
    /// clean image directly.
    pub residual: bool,
}

impl Default for ModelConfig {
    /// Desk-scale default: depth 7 / width 32 keeps CPU training tractable
    /// while preserving the architecture family.
    fn default() -> Self {
        ModelConfig {
            depth: 7,
            width: 32,
            kernel: 3,
            use_norm: true,
            residual: true,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth < 3 {
            return Err(Error::InvalidConfig(format!(
                "model depth must be >= 3, got {}",
                self.depth
            )));
        }
        if self.width < 1 {
            return Err(Error::InvalidConfig("model width must be >= 1".into()));
        }
        if self.kernel % 2 == 0 || self.kernel == 0 {
            return Err(Error::InvalidConfig(format!(
                "kernel size must be odd, got {}",
                self.kernel
            )));
        }
        Ok(())
    }

    pub fn padding(&self) -> usize {
        (self.kernel - 1) / 2
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormLayer {
    pub gamma: Parameter,
    pub beta: Parameter,
    pub running_mean: Vec<f32>,
    pub running_var: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub weights: Parameter,
    pub bias: Parameter,
    pub norm: Option<NormLayer>,
    pub relu: bool,
}

/// All learnable state of the denoiser.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub layers: Vec<Layer>,
}

/// Per-layer forward state kept for the backward pass.
pub struct LayerCache {
    conv_input: Tensor4,
    bn: Option<BnCache>,
    pre_relu: Option<Tensor4>,
}

/// He-style initialization: fan-in scaled Gaussian weights, zero biases,
/// identity batch-norm affine. Deterministic given the seed.
pub fn init_params(config: ModelConfig, seed: u64) -> Result<ModelParams> {
    config.validate()?;
    let streams = SeededRng::new(seed);
    let mut layers = Vec::with_capacity(config.depth);
    for l in 0..config.depth {
        let (ic, oc) = layer_channels(&config, l);
        let fan_in = ic * config.kernel * config.kernel;
        let std = (2.0 / fan_in as f32).sqrt();
        let normal = Normal::new(0.0f32, std).expect("valid std");
        let mut rng = streams.stream(l as u64, StreamPurpose::ParamInit);
        let n = oc * ic * config.kernel * config.kernel;
        let data: Vec<f32> = (0..n).map(|_| rng.sample(normal)).collect();
        let weights = Parameter::new(
            Tensor4::from_vec([oc, ic, config.kernel, config.kernel], data).expect("init shape"),
        );
        let bias = Parameter::new(Tensor4::zeros([1, oc, 1, 1]));
        let norm = if config.use_norm && l > 0 && l < config.depth - 1 {
            Some(NormLayer {
                gamma: Parameter::new(Tensor4::filled([1, oc, 1, 1], 1.0)),
                beta: Parameter::new(Tensor4::zeros([1, oc, 1, 1])),
                running_mean: vec![0.0; oc],
                running_var: vec![1.0; oc],
            })
        } else {
            None
        };
        layers.push(Layer {
            weights,
            bias,
            norm,
            relu: l < config.depth - 1,
        });
    }
    Ok(ModelParams { config, layers })
}

fn layer_channels(config: &ModelConfig, l: usize) -> (usize, usize) {
    let ic = if l == 0 { 1 } else { config.width };
    let oc = if l == config.depth - 1 { 1 } else { config.width };
    (ic, oc)
}

impl ModelParams {
    /// Every parameter tensor in serialization order.
    pub fn parameters(&self) -> Vec<&Parameter> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.push(&l.weights);
            out.push(&l.bias);
            if let Some(n) = &l.norm {
                out.push(&n.gamma);
                out.push(&n.beta);
            }
        }
        out
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            out.push(&mut l.weights);
            out.push(&mut l.bias);
            if let Some(n) = &mut l.norm {
                out.push(&mut n.gamma);
                out.push(&mut n.beta);
            }
        }
        out
    }

    pub fn zero_grads(&mut self) {
        adam::zero_grads(&mut self.parameters_mut());
    }

    /// Fresh Adam state aligned with this parameter set.
    pub fn adam_state(&self, lr: f32) -> AdamState {
        AdamState::new(&self.parameters(), lr)
    }

    pub fn adam_step(&mut self, state: &mut AdamState) -> Result<()> {
        adam::adam_step(&mut self.parameters_mut(), state)
    }

    /// Eval-mode residual prediction (batch norm uses running statistics).
    pub fn forward_residual(&self, frame: &Frame) -> Result<Frame> {
        if !frame.is_finite() {
            return Err(Error::NonFinite {
                context: "forward_residual input",
            });
        }
        let mut x = frame.to_tensor();
        let pad = self.config.padding();
        for layer in &self.layers {
            x = ops::conv2d(&x, &layer.weights, &layer.bias, pad)?;
            if let Some(n) = &layer.norm {
                x = ops::batch_norm_eval(&x, &n.gamma, &n.beta, &n.running_mean, &n.running_var, BN_EPS)?;
            }
            if layer.relu {
                x = ops::relu(&x);
            }
        }
        Frame::from_tensor(&x)
    }

    /// Denoised frame: `input - residual` (or the raw network output when
    /// the residual flag is off). Eval mode.
    pub fn denoise(&self, frame: &Frame) -> Result<Frame> {
        let out = self.forward_residual(frame)?;
        if self.config.residual {
            let data = frame
                .data
                .iter()
                .zip(&out.data)
                .map(|(&f, &r)| f - r)
                .collect();
            Frame::new(frame.h, frame.w, data)
        } else {
            Ok(out)
        }
    }

    /// Training-mode forward over a batched tensor, returning the network
    /// output and the per-layer caches for [`ModelParams::backward`].
    pub fn train_forward(
        &mut self,
        input: &Tensor4,
        update_running: bool,
    ) -> Result<(Tensor4, Vec<LayerCache>)> {
        if !input.is_finite() {
            return Err(Error::NonFinite {
                context: "train_forward input",
            });
        }
        let pad = self.config.padding();
        let mut x = input.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &mut self.layers {
            let conv_input = x;
            x = ops::conv2d(&conv_input, &layer.weights, &layer.bias, pad)?;
            let bn = if let Some(n) = &mut layer.norm {
                let (out, cache) = ops::batch_norm_train(
                    &x,
                    &n.gamma,
                    &n.beta,
                    &mut n.running_mean,
                    &mut n.running_var,
                    BN_MOMENTUM,
                    BN_EPS,
                    update_running,
                )?;
                x = out;
                Some(cache)
            } else {
                None
            };
            let pre_relu = if layer.relu {
                let pre = x.clone();
                x = ops::relu(&x);
                Some(pre)
            } else {
                None
            };
            caches.push(LayerCache {
                conv_input,
                bn,
                pre_relu,
            });
        }
        Ok((x, caches))
    }

    /// Backward pass matching [`ModelParams::train_forward`]; accumulates
    /// into every parameter's gradient buffer.
    pub fn backward(&mut self, caches: &[LayerCache], grad_out: &Tensor4) -> Result<()> {
        let pad = self.config.padding();
        let mut g = grad_out.clone();
        for (layer, cache) in self.layers.iter_mut().zip(caches.iter()).rev() {
            if let Some(pre) = &cache.pre_relu {
                g = ops::relu_backward(pre, &g);
            }
            if let Some(n) = &mut layer.norm {
                let bn = cache.bn.as_ref().expect("bn cache present");
                g = ops::batch_norm_backward(bn, &mut n.gamma, &mut n.beta, &g);
            }
            g = ops::conv2d_backward(&cache.conv_input, &mut layer.weights, &mut layer.bias, &g, pad)?;
        }
        Ok(())
    }
}

const WEIGHTS_MAGIC: &[u8; 4] = b"F2FW";
const WEIGHTS_VERSION: u32 = 1;

/// Writes the little-endian binary weights file.
///
/// Layout: magic `F2FW`, u32 format version, u32 depth, u32 width,
/// u32 kernel, u8 use_norm, u8 residual; then for each layer in order:
/// conv weights `[out][in][ky][kx]`, conv bias `[out]`, and for middle
/// layers when use_norm is set: gamma, beta, running mean, running
/// variance (each `[channels]`). All arrays are f32 little-endian.
pub fn save_weights(params: &ModelParams, path: &std::path::Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = BufWriter::new(file);
    let ioerr = |e: std::io::Error| Error::io(path.display().to_string(), e);
    w.write_all(WEIGHTS_MAGIC).map_err(ioerr)?;
    for v in [
        WEIGHTS_VERSION,
        params.config.depth as u32,
        params.config.width as u32,
        params.config.kernel as u32,
    ] {
        w.write_all(&v.to_le_bytes()).map_err(ioerr)?;
    }
    w.write_all(&[params.config.use_norm as u8, params.config.residual as u8])
        .map_err(ioerr)?;
    let write_slice = |w: &mut BufWriter<std::fs::File>, s: &[f32]| -> Result<()> {
        let mut buf = Vec::with_capacity(s.len() * 4);
        for v in s {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf).map_err(|e| Error::io(path.display().to_string(), e))
    };
    for layer in &params.layers {
        write_slice(&mut w, layer.weights.value.data())?;
        write_slice(&mut w, layer.bias.value.data())?;
        if let Some(n) = &layer.norm {
            write_slice(&mut w, n.gamma.value.data())?;
            write_slice(&mut w, n.beta.value.data())?;
            write_slice(&mut w, &n.running_mean)?;
            write_slice(&mut w, &n.running_var)?;
        }
    }
    w.flush().map_err(ioerr)
}

/// Reads a weights file written by [`save_weights`]; the round trip is
/// bit-exact.
pub fn load_weights(path: &std::path::Path) -> Result<ModelParams> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 4];
    read_exact_or_truncated(&mut r, &mut magic)?;
    if &magic != WEIGHTS_MAGIC {
        return Err(Error::WeightsMagic);
    }
    let version = read_u32(&mut r)?;
    if version != WEIGHTS_VERSION {
        return Err(Error::WeightsVersion(version));
    }
    let depth = read_u32(&mut r)? as usize;
    let width = read_u32(&mut r)? as usize;
    let kernel = read_u32(&mut r)? as usize;
    let mut flags = [0u8; 2];
    read_exact_or_truncated(&mut r, &mut flags)?;
    let config = ModelConfig {
        depth,
        width,
        kernel,
        use_norm: flags[0] != 0,
        residual: flags[1] != 0,
    };
    config
        .validate()
        .map_err(|e| Error::WeightsShape(e.to_string()))?;

    let mut layers = Vec::with_capacity(depth);
    for l in 0..depth {
        let (ic, oc) = layer_channels(&config, l);
        let weights = Parameter::new(Tensor4::from_vec(
            [oc, ic, kernel, kernel],
            read_f32s(&mut r, oc * ic * kernel * kernel)?,
        )?);
        let bias = Parameter::new(Tensor4::from_vec([1, oc, 1, 1], read_f32s(&mut r, oc)?)?);
        let norm = if config.use_norm && l > 0 && l < depth - 1 {
            Some(NormLayer {
                gamma: Parameter::new(Tensor4::from_vec([1, oc, 1, 1], read_f32s(&mut r, oc)?)?),
                beta: Parameter::new(Tensor4::from_vec([1, oc, 1, 1], read_f32s(&mut r, oc)?)?),
                running_mean: read_f32s(&mut r, oc)?,
                running_var: read_f32s(&mut r, oc)?,
            })
        } else {
            None
        };
        layers.push(Layer {
            weights,
            bias,
            norm,
            relu: l < depth - 1,
        });
    }
    let mut tail = [0u8; 1];
    match r.read(&mut tail) {
        Ok(0) => Ok(ModelParams { config, layers }),
        Ok(_) => Err(Error::WeightsShape(
            "trailing data beyond declared configuration".into(),
        )),
        Err(e) => Err(Error::io(path.display().to_string(), e)),
    }
}

fn read_exact_or_truncated(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::WeightsTruncated
        } else {
            Error::io("weights file", e)
        }
    })
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact_or_truncated(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f32s(r: &mut impl Read, n: usize) -> Result<Vec<f32>> {
    let mut bytes = vec![0u8; n * 4];
    read_exact_or_truncated(r, &mut bytes)?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::masked_l2_loss;

    fn small_config() -> ModelConfig {
        ModelConfig {
            depth: 4,
            width: 6,
            kernel: 3,
            use_norm: true,
            residual: true,
        }
    }

    fn random_frame(h: usize, w: usize, seed: u64) -> Frame {
        let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15) | 1;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f32 / (1u64 << 53) as f32
        };
        Frame::new(h, w, (0..h * w).map(|_| next()).collect()).unwrap()
    }

    #[test]
    fn init_is_deterministic_and_seed_sensitive() {
        let a = init_params(small_config(), 7).unwrap();
        let b = init_params(small_config(), 7).unwrap();
        assert_eq!(a, b);
        let c = init_params(small_config(), 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn init_he_variance() {
        let cfg = ModelConfig {
            depth: 3,
            width: 64,
            kernel: 3,
            use_norm: false,
            residual: true,
        };
        let p = init_params(cfg, 42).unwrap();
        // middle layer: 64 -> 64, fan_in = 576
        let w = p.layers[1].weights.value.data();
        let n = w.len() as f64;
        let mean: f64 = w.iter().map(|&v| v as f64).sum::<f64>() / n;
        let var: f64 = w.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
        let expect = 2.0 / 576.0;
        assert!(
            (var - expect).abs() < 0.2 * expect,
            "var {var} vs {expect}"
        );
    }

    #[test]
    fn zeroed_last_layer_makes_denoise_identity() {
        let mut p = init_params(small_config(), 3).unwrap();
        let last = p.layers.last_mut().unwrap();
        last.weights.value.fill(0.0);
        last.bias.value.fill(0.0);
        let f = random_frame(11, 13, 5);
        let residual = p.forward_residual(&f).unwrap();
        assert!(residual.data.iter().all(|&v| v == 0.0));
        let d = p.denoise(&f).unwrap();
        assert_eq!(d, f);
    }

    #[test]
    fn shape_preservation() {
        let p = init_params(small_config(), 1).unwrap();
        for (h, w) in [(17, 23), (64, 64), (96, 128)] {
            let f = random_frame(h, w, h as u64 * 31 + w as u64);
            let out = p.forward_residual(&f).unwrap();
            assert_eq!((out.h, out.w), (h, w));
        }
    }

    #[test]
    fn eval_forward_is_deterministic() {
        let p = init_params(small_config(), 11).unwrap();
        let f = random_frame(16, 16, 2);
        let a = p.forward_residual(&f).unwrap();
        let b = p.forward_residual(&f).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn non_finite_input_rejected() {
        let p = init_params(small_config(), 11).unwrap();
        let mut f = Frame::zeros(8, 8);
        f.data[3] = f32::NAN;
        assert!(matches!(
            p.forward_residual(&f),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn train_eval_agree_without_norm() {
        let cfg = ModelConfig {
            use_norm: false,
            ..small_config()
        };
        let mut p = init_params(cfg, 9).unwrap();
        let f = random_frame(12, 12, 1);
        let (out, _) = p.train_forward(&f.to_tensor(), true).unwrap();
        let eval = p.forward_residual(&f).unwrap();
        assert_eq!(out.data(), eval.to_tensor().data());
    }

    #[test]
    fn gradient_reaches_every_trainable_parameter() {
        let mut p = init_params(small_config(), 21).unwrap();
        let f = random_frame(14, 14, 3);
        let target = random_frame(14, 14, 4);
        let (out, caches) = p.train_forward(&f.to_tensor(), true).unwrap();
        let loss = masked_l2_loss(&out, &target.to_tensor(), None).unwrap();
        p.backward(&caches, &loss.grad).unwrap();
        for (i, param) in p.parameters().iter().enumerate() {
            assert!(
                param.grad.data().iter().any(|&g| g != 0.0),
                "parameter {i} has all-zero gradient"
            );
        }
    }

    #[test]
    fn weights_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.f2fw");
        let mut p = init_params(small_config(), 33).unwrap();
        // make running stats non-trivial so the round trip covers them
        if let Some(n) = &mut p.layers[1].norm {
            n.running_mean[0] = 0.25;
            n.running_var[1] = 3.5;
        }
        save_weights(&p, &path).unwrap();
        let q = load_weights(&path).unwrap();
        assert_eq!(p, q);

        // truncation
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        assert!(matches!(load_weights(&path), Err(Error::WeightsTruncated)));

        // bad magic
        let mut bad = bytes.clone();
        bad[0] = b'X';
        std::fs::write(&path, &bad).unwrap();
        assert!(matches!(load_weights(&path), Err(Error::WeightsMagic)));

        // declared depth inconsistent with payload
        let mut mism = bytes.clone();
        let depth_bytes = ((small_config().depth + 1) as u32).to_le_bytes();
        mism[8..12].copy_from_slice(&depth_bytes);
        std::fs::write(&path, &mism).unwrap();
        assert!(matches!(load_weights(&path), Err(Error::WeightsTruncated)));

        // trailing data
        let mut longer = bytes.clone();
        longer.extend_from_slice(&[0u8; 4]);
        std::fs::write(&path, &longer).unwrap();
        assert!(matches!(load_weights(&path), Err(Error::WeightsShape(_))));
    }
}
