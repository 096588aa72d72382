//! Training procedures: pretraining on synthetic AWGN, offline (whole
//! video) fine-tuning, online (frame-by-frame) fine-tuning with warm-started
//! parameters, and lifelong runs under a time-varying noise schedule.
//!
//! Fine-tuning never sees clean data: each frame is supervised by the
//! motion-compensated neighboring frame under the occlusion mask, one Adam
//! step per iteration at the configured learning rate.

use rayon::prelude::*;

use crate::adam::AdamState;
use crate::error::{Error, Result};
use crate::flow::FlowConfig;
use crate::frame::{Frame, FrameSequence};
use crate::metrics::psnr;
use crate::model::{init_params, ModelConfig, ModelParams};
use crate::noise::{apply_noise, schedule_eval, NoiseSchedule};
use crate::ops::{masked_loss, LossKind};
use crate::rng::{SeededRng, StreamPurpose};
use crate::tensor::Tensor4;
use crate::warp::{build_pair, OcclusionConfig, TrainingPair};
use rand::seq::SliceRandom;
use rand::Rng;
use std::io::Write;

/// Pretraining recipe: random crops of a clean corpus with fresh AWGN per
/// step, L2 residual loss, Adam with step decay (x0.5 every quarter).
#[derive(Clone, Debug)]
pub struct PretrainConfig {
    pub model: ModelConfig,
    /// AWGN level on the [0,1] scale.
    pub sigma: f32,
    pub crop_size: usize,
    pub batch: usize,
    pub steps: usize,
    pub lr: f32,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            model: ModelConfig::default(),
            sigma: 25.0 / 255.0,
            crop_size: 48,
            batch: 16,
            steps: 2000,
            lr: 1e-3,
        }
    }
}

/// Fine-tuning hyperparameters shared by the online and offline variants.
/// `epochs` applies to offline only; `freeze_after` and `carry_adam` to
/// online only. `lr = 0` disables updates entirely, reducing both variants
/// to frame-wise denoising with the starting parameters.
#[derive(Clone, Debug)]
pub struct FinetuneConfig {
    pub lr: f32,
    /// Adam steps per frame (online) -- the per-frame iteration budget.
    pub n_iters: usize,
    /// Shuffled passes over all pairs (offline).
    pub epochs: usize,
    pub loss: LossKind,
    /// Also train against the forward-warped next frame, alternating pairs.
    pub symmetric: bool,
    /// Keep Adam moments across frames (online).
    pub carry_adam: bool,
    /// Stop updating after this frame index; earlier parameters denoise the
    /// remainder (online).
    pub freeze_after: Option<usize>,
    /// Keep batch-norm running statistics fixed during fine-tuning.
    pub freeze_norm_stats: bool,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        FinetuneConfig {
            lr: 5e-5,
            n_iters: 20,
            epochs: 20,
            loss: LossKind::L1,
            symmetric: false,
            carry_adam: true,
            freeze_after: None,
            freeze_norm_stats: false,
        }
    }
}

impl FinetuneConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return Err(Error::InvalidConfig(format!("lr must be >= 0, got {}", self.lr)));
        }
        if self.n_iters == 0 {
            return Err(Error::InvalidConfig("n_iters must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-frame log row; PSNR columns are present only when clean frames were
/// supplied, loss columns only for frames that actually trained.
#[derive(Clone, Debug)]
pub struct FrameLog {
    pub t: usize,
    pub psnr_finetuned: Option<f64>,
    pub psnr_pretrained: Option<f64>,
    pub loss_before: f64,
    pub loss_after: f64,
    pub masked_fraction: f64,
    pub active_spec: Option<String>,
}

/// Everything a fine-tuning run produces.
pub struct FinetuneOutput {
    pub denoised: FrameSequence,
    pub log: Vec<FrameLog>,
    pub params: ModelParams,
}

/// Writes the per-frame training log CSV:
/// `frame_index,psnr_finetuned,psnr_pretrained,loss_before,loss_after,masked_fraction,active_noise_spec`.
pub fn write_train_log(rows: &[FrameLog], path: &std::path::Path) -> Result<()> {
    let mut buf = String::from(
        "frame_index,psnr_finetuned,psnr_pretrained,loss_before,loss_after,masked_fraction,active_noise_spec\n",
    );
    let fmt = |v: f64| if v.is_nan() { "nan".to_string() } else { format!("{v:.4}") };
    let opt = |v: Option<f64>| fmt(v.unwrap_or(f64::NAN));
    for r in rows {
        buf.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.t,
            opt(r.psnr_finetuned),
            opt(r.psnr_pretrained),
            fmt(r.loss_before),
            fmt(r.loss_after),
            fmt(r.masked_fraction),
            r.active_spec.as_deref().unwrap_or("-"),
        ));
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    f.write_all(buf.as_bytes())
        .map_err(|e| Error::io(path.display().to_string(), e))
}

/// Pretrains a denoiser; see [`pretrain_with_log`].
pub fn pretrain(corpus: &FrameSequence, cfg: &PretrainConfig, seed: u64) -> Result<ModelParams> {
    pretrain_with_log(corpus, cfg, seed).map(|(p, _)| p)
}

/// Pretrains a randomly initialized denoiser on random corpus crops with
/// fresh AWGN each step, returning the parameters and the per-step loss
/// history. Deterministic given the seed.
pub fn pretrain_with_log(
    corpus: &FrameSequence,
    cfg: &PretrainConfig,
    seed: u64,
) -> Result<(ModelParams, Vec<f64>)> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let (h, w) = corpus.dims().unwrap();
    if cfg.crop_size > h.min(w) {
        return Err(Error::InvalidConfig(format!(
            "crop size {} exceeds corpus dims {h}x{w}",
            cfg.crop_size
        )));
    }
    if cfg.batch == 0 {
        return Err(Error::InvalidConfig("batch must be >= 1".into()));
    }
    let mut params = init_params(cfg.model, seed)?;
    if cfg.steps == 0 {
        return Ok((params, Vec::new()));
    }
    let streams = SeededRng::new(seed);
    let mut adam = params.adam_state(cfg.lr);
    let cs = cfg.crop_size;
    let mut losses = Vec::with_capacity(cfg.steps);

    for step in 0..cfg.steps {
        // step decay: halve the learning rate at each quarter
        let quarter = (4 * step) / cfg.steps.max(1);
        adam.lr = cfg.lr * 0.5f32.powi(quarter as i32);

        let mut crop_rng = streams.stream(step as u64, StreamPurpose::PretrainCrop);
        let mut clean = Tensor4::zeros([cfg.batch, 1, cs, cs]);
        for b in 0..cfg.batch {
            let img = corpus.frame(crop_rng.gen_range(0..corpus.len()) + 1);
            let y0 = crop_rng.gen_range(0..=h - cs);
            let x0 = crop_rng.gen_range(0..=w - cs);
            let plane = clean.plane_mut(b, 0);
            for y in 0..cs {
                plane[y * cs..(y + 1) * cs]
                    .copy_from_slice(&img.row(y0 + y)[x0..x0 + cs]);
            }
        }

        let mut noise_rng = streams.stream(step as u64, StreamPurpose::PretrainNoise);
        let normal = rand_distr::Normal::new(0.0f32, 1.0).unwrap();
        let mut noise = Tensor4::zeros(clean.shape());
        for v in noise.data_mut() {
            *v = cfg.sigma * rand_distr::Distribution::sample(&normal, &mut noise_rng);
        }
        let mut input = clean.clone();
        for (iv, nv) in input.data_mut().iter_mut().zip(noise.data()) {
            *iv += *nv;
        }
        let target = if cfg.model.residual { &noise } else { &clean };

        let (out, caches) = params.train_forward(&input, true)?;
        let loss = masked_loss(LossKind::L2, &out, target, None)?;
        if !loss.value.is_finite() {
            return Err(Error::NumericalFailure {
                frame: None,
                detail: format!("non-finite pretraining loss at step {step}"),
            });
        }
        params.backward(&caches, &loss.grad)?;
        params.adam_step(&mut adam)?;
        params.zero_grads();
        losses.push(loss.value);
        if step % 50 == 0 {
            log::debug!("pretrain step {step}: loss {:.6}", loss.value);
        }
    }
    Ok((params, losses))
}

/// Mean PSNR of noisy inputs and of their denoised outputs over a frame
/// set, with deterministic per-frame evaluation noise.
pub struct DenoiseEval {
    pub mean_psnr_noisy: f64,
    pub mean_psnr_denoised: f64,
}

impl DenoiseEval {
    pub fn gain_db(&self) -> f64 {
        self.mean_psnr_denoised - self.mean_psnr_noisy
    }
}

/// Corrupts each frame with AWGN (independent per-frame streams) and
/// reports mean PSNR before and after denoising.
pub fn evaluate_denoiser(
    params: &ModelParams,
    frames: &[Frame],
    sigma: f32,
    seed: u64,
) -> Result<DenoiseEval> {
    if frames.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let streams = SeededRng::new(seed);
    let normal = rand_distr::Normal::new(0.0f32, 1.0).unwrap();
    let mut noisy_psnr = 0.0;
    let mut den_psnr = 0.0;
    for (i, clean) in frames.iter().enumerate() {
        let mut rng = streams.stream(i as u64, StreamPurpose::PretrainEvalNoise);
        let noisy = Frame {
            h: clean.h,
            w: clean.w,
            data: clean
                .data
                .iter()
                .map(|&v| v + sigma * rand_distr::Distribution::sample(&normal, &mut rng))
                .collect(),
        };
        noisy_psnr += psnr(&noisy, clean)?;
        den_psnr += psnr(&params.denoise(&noisy)?, clean)?;
    }
    let n = frames.len() as f64;
    Ok(DenoiseEval {
        mean_psnr_noisy: noisy_psnr / n,
        mean_psnr_denoised: den_psnr / n,
    })
}

/// One Adam step on a (frame, warped target, mask) tuple. Returns the loss
/// value observed by the forward pass.
fn train_step(
    params: &mut ModelParams,
    adam: &mut AdamState,
    input: &Tensor4,
    frame_data: &Tensor4,
    pair: &TrainingPair,
    cfg: &FinetuneConfig,
    t: usize,
) -> Result<f64> {
    let (out, caches) = params.train_forward(input, !cfg.freeze_norm_stats)?;
    let pred = if params.config.residual {
        let mut p = frame_data.clone();
        for (pv, ov) in p.data_mut().iter_mut().zip(out.data()) {
            *pv -= *ov;
        }
        p
    } else {
        out
    };
    let target = pair.warped.to_tensor();
    let loss = masked_loss(cfg.loss, &pred, &target, Some(&pair.mask))?;
    if !loss.value.is_finite() {
        return Err(Error::NumericalFailure {
            frame: Some(t),
            detail: "non-finite fine-tuning loss".into(),
        });
    }
    let grad_net = if params.config.residual {
        // denoised = f - out, so d loss / d out = -d loss / d denoised
        let mut g = loss.grad;
        for v in g.data_mut() {
            *v = -*v;
        }
        g
    } else {
        loss.grad
    };
    params.backward(&caches, &grad_net)?;
    params.adam_step(adam)?;
    params.zero_grads();
    Ok(loss.value)
}

/// Loss of the current parameters on a pair, in training mode but without
/// touching running statistics or gradients.
fn probe_loss(
    params: &mut ModelParams,
    input: &Tensor4,
    frame_data: &Tensor4,
    pair: &TrainingPair,
    cfg: &FinetuneConfig,
) -> Result<f64> {
    let (out, _) = params.train_forward(input, false)?;
    let pred = if params.config.residual {
        let mut p = frame_data.clone();
        for (pv, ov) in p.data_mut().iter_mut().zip(out.data()) {
            *pv -= *ov;
        }
        p
    } else {
        out
    };
    let target = pair.warped.to_tensor();
    Ok(masked_loss(cfg.loss, &pred, &target, Some(&pair.mask))?.value)
}

fn check_video(noisy: &FrameSequence, clean: Option<&FrameSequence>) -> Result<()> {
    if noisy.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "fine-tuning needs at least 2 frames, got {}",
            noisy.len()
        )));
    }
    if let Some(c) = clean {
        if c.len() != noisy.len() || c.dims() != noisy.dims() {
            return Err(Error::InvalidConfig(
                "clean sequence must match the noisy sequence in length and dims".into(),
            ));
        }
    }
    Ok(())
}

fn psnr_opt(candidate: &Frame, clean: Option<&FrameSequence>, t: usize) -> Result<Option<f64>> {
    Ok(match clean {
        Some(c) => Some(psnr(candidate, c.frame(t))?),
        None => None,
    })
}

/// Online, frame-by-frame fine-tuning.
///
/// Frame 1 is denoised with the starting parameters. For each later frame
/// the previous frame is motion-compensated onto it and `n_iters` Adam
/// steps minimize the masked loss against that warped neighbor, warm
/// started from the previous frame's parameters; the frame is then denoised
/// with the updated parameters. With `symmetric` the forward-warped next
/// frame alternates in as a second target. Pairs whose mask is empty are
/// skipped. After `freeze_after`, parameters stay fixed.
pub fn finetune_online(
    noisy: &FrameSequence,
    params0: &ModelParams,
    flow_cfg: &FlowConfig,
    occ_cfg: &OcclusionConfig,
    cfg: &FinetuneConfig,
    clean: Option<&FrameSequence>,
) -> Result<FinetuneOutput> {
    cfg.validate()?;
    flow_cfg.validate()?;
    occ_cfg.validate()?;
    check_video(noisy, clean)?;
    let t_total = noisy.len();
    let t_train_max = cfg.freeze_after.unwrap_or(t_total).min(t_total);

    let mut params = params0.clone();
    let mut adam = params.adam_state(cfg.lr);
    let training = cfg.lr > 0.0;

    // backward pairs (and forward pairs when symmetric) for every frame
    // that will train; pure per-frame work, done in parallel
    let backward_pairs: Vec<Option<TrainingPair>> = if training {
        (2..=t_train_max)
            .into_par_iter()
            .map(|t| build_pair(noisy.frame(t), noisy.frame(t - 1), flow_cfg, occ_cfg).map(Some))
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let forward_pairs: Vec<Option<TrainingPair>> = if training && cfg.symmetric {
        (2..=t_train_max)
            .into_par_iter()
            .map(|t| {
                if t < t_total {
                    build_pair(noisy.frame(t), noisy.frame(t + 1), flow_cfg, occ_cfg).map(Some)
                } else {
                    Ok(None)
                }
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };

    let mut denoised = Vec::with_capacity(t_total);
    let mut log = Vec::with_capacity(t_total);

    for t in 1..=t_total {
        let frame = noisy.frame(t);
        let mut loss_before = f64::NAN;
        let mut loss_after = f64::NAN;
        let mut masked_fraction = f64::NAN;

        if training && t >= 2 && t <= t_train_max {
            let pair_b = backward_pairs[t - 2].as_ref().expect("built above");
            let pair_f = if cfg.symmetric {
                forward_pairs[t - 2].as_ref()
            } else {
                None
            };
            let mut candidates: Vec<&TrainingPair> = Vec::with_capacity(2);
            if !pair_b.is_empty() {
                candidates.push(pair_b);
            }
            if let Some(pf) = pair_f {
                if !pf.is_empty() {
                    candidates.push(pf);
                }
            }
            masked_fraction = pair_b.mask.fraction();
            if candidates.is_empty() {
                log::debug!("frame {t}: empty occlusion mask, pair skipped");
                masked_fraction = 0.0;
            } else {
                if !cfg.carry_adam {
                    adam = params.adam_state(cfg.lr);
                }
                let input = frame.to_tensor();
                let probe = candidates[0];
                for i in 0..cfg.n_iters {
                    let pair = candidates[i % candidates.len()];
                    let loss = train_step(&mut params, &mut adam, &input, &input, pair, cfg, t)?;
                    if i == 0 {
                        loss_before = loss;
                    }
                }
                loss_after = probe_loss(&mut params, &input, &input, probe, cfg)?;
            }
        }

        let den = params.denoise(frame)?;
        log.push(FrameLog {
            t,
            psnr_finetuned: psnr_opt(&den, clean, t)?,
            psnr_pretrained: match clean {
                Some(c) => Some(psnr(&params0.denoise(frame)?, c.frame(t))?),
                None => None,
            },
            loss_before,
            loss_after,
            masked_fraction,
            active_spec: None,
        });
        denoised.push(den);
    }

    Ok(FinetuneOutput {
        denoised: FrameSequence::from_frames(denoised)?,
        log,
        params,
    })
}

/// Offline (batch) fine-tuning: all pairs are built up front (both temporal
/// directions when `symmetric`), then `epochs` shuffled passes make one
/// Adam step per pair; the final parameters denoise every frame.
pub fn finetune_offline(
    noisy: &FrameSequence,
    params0: &ModelParams,
    flow_cfg: &FlowConfig,
    occ_cfg: &OcclusionConfig,
    cfg: &FinetuneConfig,
    seed: u64,
    clean: Option<&FrameSequence>,
) -> Result<FinetuneOutput> {
    cfg.validate()?;
    flow_cfg.validate()?;
    occ_cfg.validate()?;
    check_video(noisy, clean)?;
    let t_total = noisy.len();
    let training = cfg.lr > 0.0 && cfg.epochs > 0;

    let mut params = params0.clone();

    // (target frame index, pair)
    let mut pairs: Vec<(usize, TrainingPair)> = Vec::new();
    if training {
        let mut jobs: Vec<(usize, usize)> = (2..=t_total).map(|t| (t, t - 1)).collect();
        if cfg.symmetric {
            jobs.extend((1..t_total).map(|t| (t, t + 1)));
        }
        let built: Vec<(usize, TrainingPair)> = jobs
            .into_par_iter()
            .map(|(t, r)| {
                build_pair(noisy.frame(t), noisy.frame(r), flow_cfg, occ_cfg).map(|p| (t, p))
            })
            .collect::<Result<Vec<_>>>()?;
        for (t, p) in built {
            if p.is_empty() {
                log::debug!("offline pair for frame {t}: empty mask, skipped");
            } else {
                pairs.push((t, p));
            }
        }
    }

    let mut first_loss: Vec<f64> = vec![f64::NAN; t_total + 1];
    let mut last_loss: Vec<f64> = vec![f64::NAN; t_total + 1];
    let mut mask_frac: Vec<f64> = vec![f64::NAN; t_total + 1];
    for (t, p) in &pairs {
        mask_frac[*t] = p.mask.fraction();
    }

    if training && !pairs.is_empty() {
        let streams = SeededRng::new(seed);
        let mut adam = params.adam_state(cfg.lr);
        let inputs: Vec<Tensor4> = (1..=t_total).map(|t| noisy.frame(t).to_tensor()).collect();
        for epoch in 0..cfg.epochs {
            let mut order: Vec<usize> = (0..pairs.len()).collect();
            let mut rng = streams.stream(epoch as u64, StreamPurpose::OfflineShuffle);
            order.shuffle(&mut rng);
            for idx in order {
                let (t, pair) = &pairs[idx];
                let input = &inputs[*t - 1];
                let loss = train_step(&mut params, &mut adam, input, input, pair, cfg, *t)?;
                if first_loss[*t].is_nan() {
                    first_loss[*t] = loss;
                }
                last_loss[*t] = loss;
            }
            log::debug!("offline epoch {epoch} done");
        }
    }

    let denoised: Vec<Frame> = (1..=t_total)
        .into_par_iter()
        .map(|t| params.denoise(noisy.frame(t)))
        .collect::<Result<Vec<_>>>()?;

    let mut log = Vec::with_capacity(t_total);
    for t in 1..=t_total {
        log.push(FrameLog {
            t,
            psnr_finetuned: psnr_opt(&denoised[t - 1], clean, t)?,
            psnr_pretrained: match clean {
                Some(c) => Some(psnr(&params0.denoise(noisy.frame(t))?, c.frame(t))?),
                None => None,
            },
            loss_before: first_loss[t],
            loss_after: last_loss[t],
            masked_fraction: mask_frac[t],
            active_spec: None,
        });
    }

    Ok(FinetuneOutput {
        denoised: FrameSequence::from_frames(denoised)?,
        log,
        params,
    })
}

/// Corrupts a clean sequence frame-by-frame under a schedule. Per-frame
/// noise streams are independent and keyed by the 1-based frame index, so
/// the result does not depend on evaluation order.
pub fn corrupt_sequence(
    clean: &FrameSequence,
    schedule: &NoiseSchedule,
    seed: u64,
) -> Result<FrameSequence> {
    schedule.validate()?;
    let streams = SeededRng::new(seed);
    let frames: Vec<Frame> = (1..=clean.len())
        .into_par_iter()
        .map(|t| apply_noise(clean.frame(t), &schedule_eval(schedule, t), &streams, t))
        .collect::<Result<Vec<_>>>()?;
    FrameSequence::from_frames(frames)
}

/// Frame-wise denoising with fixed parameters (eval mode).
pub fn denoise_sequence(params: &ModelParams, noisy: &FrameSequence) -> Result<FrameSequence> {
    let frames: Vec<Frame> = noisy
        .frames()
        .par_iter()
        .map(|f| params.denoise(f))
        .collect::<Result<Vec<_>>>()?;
    FrameSequence::from_frames(frames)
}

/// A lifelong run: corrupt a clean video under the schedule, fine-tune
/// online on the result, and log the active noise spec per frame.
pub struct LifelongOutput {
    pub noisy: FrameSequence,
    pub output: FinetuneOutput,
}

pub fn run_lifelong(
    clean: &FrameSequence,
    schedule: &NoiseSchedule,
    params0: &ModelParams,
    flow_cfg: &FlowConfig,
    occ_cfg: &OcclusionConfig,
    cfg: &FinetuneConfig,
    seed: u64,
) -> Result<LifelongOutput> {
    let noisy = corrupt_sequence(clean, schedule, seed)?;
    let mut output = finetune_online(&noisy, params0, flow_cfg, occ_cfg, cfg, Some(clean))?;
    for row in &mut output.log {
        row.active_spec = Some(schedule_eval(schedule, row.t).label());
    }
    Ok(LifelongOutput { noisy, output })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseSpec;
    use crate::synth::{synth_corpus, synth_video};

    fn tiny_model() -> ModelConfig {
        ModelConfig {
            depth: 3,
            width: 4,
            kernel: 3,
            use_norm: true,
            residual: true,
        }
    }

    fn tiny_video(frames: usize) -> (FrameSequence, FrameSequence) {
        let clean = synth_video(frames, 24, 32, 11, (0.4, 0.2), 0.2, 0.8);
        let noisy = corrupt_sequence(
            &clean,
            &NoiseSchedule::Constant(NoiseSpec::Awgn { sigma: 25.0 / 255.0 }),
            77,
        )
        .unwrap();
        (clean, noisy)
    }

    #[test]
    fn pretrain_zero_steps_returns_init() {
        let corpus = synth_corpus(2, 32, 32, 5, 0.1, 0.9);
        let cfg = PretrainConfig {
            model: tiny_model(),
            crop_size: 16,
            batch: 2,
            steps: 0,
            ..PretrainConfig::default()
        };
        let p = pretrain(&corpus, &cfg, 3).unwrap();
        assert_eq!(p, init_params(tiny_model(), 3).unwrap());
    }

    #[test]
    fn pretrain_rejects_empty_corpus() {
        let cfg = PretrainConfig {
            model: tiny_model(),
            ..PretrainConfig::default()
        };
        assert!(matches!(
            pretrain(&FrameSequence::empty(), &cfg, 1),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn lr_zero_equals_framewise_denoising() {
        let (_, noisy) = tiny_video(3);
        let params0 = init_params(tiny_model(), 9).unwrap();
        let cfg = FinetuneConfig {
            lr: 0.0,
            n_iters: 4,
            ..FinetuneConfig::default()
        };
        let out = finetune_online(
            &noisy,
            &params0,
            &FlowConfig::default(),
            &OcclusionConfig::default(),
            &cfg,
            None,
        )
        .unwrap();
        let direct = denoise_sequence(&params0, &noisy).unwrap();
        assert_eq!(out.denoised, direct);
        assert_eq!(out.params, params0);
    }

    #[test]
    fn offline_zero_epochs_keeps_params() {
        let (_, noisy) = tiny_video(3);
        let params0 = init_params(tiny_model(), 9).unwrap();
        let cfg = FinetuneConfig {
            epochs: 0,
            ..FinetuneConfig::default()
        };
        let out = finetune_offline(
            &noisy,
            &params0,
            &FlowConfig::default(),
            &OcclusionConfig::default(),
            &cfg,
            5,
            None,
        )
        .unwrap();
        assert_eq!(out.params, params0);
        assert_eq!(out.denoised, denoise_sequence(&params0, &noisy).unwrap());
    }

    #[test]
    fn online_needs_two_frames() {
        let clean = synth_video(1, 24, 32, 1, (0.0, 0.0), 0.2, 0.8);
        let params0 = init_params(tiny_model(), 1).unwrap();
        assert!(finetune_online(
            &clean,
            &params0,
            &FlowConfig::default(),
            &OcclusionConfig::default(),
            &FinetuneConfig::default(),
            None,
        )
        .is_err());
    }

    #[test]
    fn online_is_reproducible() {
        let (_, noisy) = tiny_video(4);
        let params0 = init_params(tiny_model(), 9).unwrap();
        let cfg = FinetuneConfig {
            n_iters: 3,
            ..FinetuneConfig::default()
        };
        let run = || {
            finetune_online(
                &noisy,
                &params0,
                &FlowConfig::default(),
                &OcclusionConfig::default(),
                &cfg,
                None,
            )
            .unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.params, b.params);
        assert_eq!(a.denoised, b.denoised);
    }

    #[test]
    fn constant_schedule_lifelong_matches_online() {
        let clean = synth_video(4, 24, 32, 13, (0.4, 0.2), 0.2, 0.8);
        let schedule = NoiseSchedule::Constant(NoiseSpec::Awgn { sigma: 25.0 / 255.0 });
        let params0 = init_params(tiny_model(), 9).unwrap();
        let cfg = FinetuneConfig {
            n_iters: 2,
            ..FinetuneConfig::default()
        };
        let life = run_lifelong(
            &clean,
            &schedule,
            &params0,
            &FlowConfig::default(),
            &OcclusionConfig::default(),
            &cfg,
            321,
        )
        .unwrap();
        let noisy = corrupt_sequence(&clean, &schedule, 321).unwrap();
        assert_eq!(life.noisy, noisy);
        let direct = finetune_online(
            &noisy,
            &params0,
            &FlowConfig::default(),
            &OcclusionConfig::default(),
            &cfg,
            Some(&clean),
        )
        .unwrap();
        assert_eq!(life.output.denoised, direct.denoised);
        assert_eq!(life.output.params, direct.params);
    }
}
