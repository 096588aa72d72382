//! Command implementations. Every command writes a manifest next to its
//! primary output and returns a process exit code.

use crate::cli::*;
use crate::manifest::{manifest_path, RunManifest};
use f2f_core::csv::{write_csv, MetricsRow};
use f2f_core::flow::{tvl1_flow, write_flo, FlowConfig};
use f2f_core::frame::{Frame, FrameSequence};
use f2f_core::metrics::{mean_std, psnr};
use f2f_core::model::{load_weights, save_weights, ModelConfig};
use f2f_core::noise::{parse_schedule, parse_spec, NoiseSchedule, NoiseSpec};
use f2f_core::ops::LossKind;
use f2f_core::pgm::{load_sequence, read_pgm, save_sequence, write_pgm, PgmDepth};
use f2f_core::synth::{synth_corpus, synth_video};
use f2f_core::train::{
    corrupt_sequence, denoise_sequence, evaluate_denoiser, finetune_offline, finetune_online,
    pretrain_with_log, write_train_log, FinetuneConfig, FinetuneOutput, PretrainConfig,
};
use f2f_core::warp::{build_pair_with_flow, OcclusionConfig};
use f2f_core::{Error, Result};
use std::io::Write as _;
use std::path::Path;

impl Bits {
    fn depth(self) -> PgmDepth {
        match self {
            Bits::Eight => PgmDepth::Eight,
            Bits::Sixteen => PgmDepth::Sixteen,
        }
    }

    fn label(self) -> &'static str {
        match self {
            Bits::Eight => "8",
            Bits::Sixteen => "16",
        }
    }
}

impl FlowOptArgs {
    fn flow_config(&self) -> FlowConfig {
        FlowConfig {
            lambda_data: self.flow_lambda,
            n_warps: self.flow_warps,
            n_iters: self.flow_iters,
            prefilter_downscale: self.flow_downscale,
            n_scales: if self.flow_scales == 0 { None } else { Some(self.flow_scales) },
            median_filter: !self.no_median,
            ..FlowConfig::default()
        }
    }

    fn occ_config(&self) -> OcclusionConfig {
        OcclusionConfig {
            tau_div: self.tau_div,
            dilation_radius: self.dilation,
        }
    }

    fn record(&self, m: &mut RunManifest) {
        m.flag("flow_lambda", self.flow_lambda)
            .flag("flow_warps", self.flow_warps)
            .flag("flow_iters", self.flow_iters)
            .flag("flow_downscale", self.flow_downscale)
            .flag("flow_scales", self.flow_scales)
            .flag("median_filter", !self.no_median)
            .flag("tau_div", self.tau_div)
            .flag("dilation", self.dilation);
    }
}

impl ModelArgs {
    fn model_config(&self) -> ModelConfig {
        ModelConfig {
            depth: self.depth,
            width: self.width,
            kernel: self.kernel,
            use_norm: !self.no_norm,
            residual: !self.no_residual,
        }
    }
}

/// Resolves the noise flags into a schedule.
fn schedule_from_args(args: &NoiseArgs) -> Result<NoiseSchedule> {
    if let Some(text) = &args.schedule {
        return parse_schedule(text);
    }
    if let Some(path) = &args.schedule_file {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.clone(), e))?;
        return parse_schedule(&text);
    }
    let kind = args
        .noise
        .as_deref()
        .ok_or_else(|| Error::InvalidConfig("one of --noise / --schedule / --schedule-file is required".into()))?;
    let need = |v: Option<f32>, name: &str| {
        v.ok_or_else(|| Error::InvalidConfig(format!("--{name} is required for --noise {kind}")))
    };
    let spec = match kind {
        "awgn" => NoiseSpec::Awgn {
            sigma: need(args.sigma, "sigma")? / 255.0,
        },
        "mult" | "multiplicative" => NoiseSpec::Multiplicative {
            sigma: need(args.sigma, "sigma")? / 255.0,
        },
        "correlated" => NoiseSpec::Correlated {
            sigma: need(args.sigma, "sigma")? / 255.0,
            disk_radius: args.radius.unwrap_or(2.0),
        },
        "salt_pepper" | "saltpepper" | "sp" => NoiseSpec::SaltPepper {
            p: need(args.p, "p")?,
        },
        "jpeg_awgn" | "jpeg" => NoiseSpec::JpegAwgn {
            sigma: need(args.sigma, "sigma")? / 255.0,
            quality: args
                .quality
                .ok_or_else(|| Error::InvalidConfig("--quality is required for --noise jpeg_awgn".into()))?,
        },
        "ramp" | "switch" => {
            let a = parse_spec(
                args.spec_a
                    .as_deref()
                    .ok_or_else(|| Error::InvalidConfig(format!("--spec-a is required for --noise {kind}")))?,
            )?;
            let b = parse_spec(
                args.spec_b
                    .as_deref()
                    .ok_or_else(|| Error::InvalidConfig(format!("--spec-b is required for --noise {kind}")))?,
            )?;
            let schedule = if kind == "switch" {
                NoiseSchedule::Switch {
                    a,
                    b,
                    t_switch: args
                        .at
                        .ok_or_else(|| Error::InvalidConfig("--at is required for --noise switch".into()))?,
                }
            } else {
                NoiseSchedule::LinearRamp {
                    start: a,
                    end: b,
                    t_start: args
                        .from
                        .ok_or_else(|| Error::InvalidConfig("--from is required for --noise ramp".into()))?,
                    t_end: args
                        .to
                        .ok_or_else(|| Error::InvalidConfig("--to is required for --noise ramp".into()))?,
                }
            };
            schedule.validate()?;
            return Ok(schedule);
        }
        other => return Err(Error::UnknownNoiseKind(other.to_string())),
    };
    let schedule = NoiseSchedule::Constant(spec);
    schedule.validate()?;
    Ok(schedule)
}

fn schedule_label(s: &NoiseSchedule) -> String {
    match s {
        NoiseSchedule::Constant(spec) => spec.label(),
        NoiseSchedule::LinearRamp {
            start,
            end,
            t_start,
            t_end,
        } => format!("ramp[{}..{}] {} -> {}", t_start, t_end, start.label(), end.label()),
        NoiseSchedule::Switch { a, b, t_switch } => {
            format!("switch@{} {} -> {}", t_switch, a.label(), b.label())
        }
    }
}

pub fn cmd_synth(args: &SynthArgs, seed: u64, threads: usize) -> Result<i32> {
    let seq = match args.kind {
        SynthKind::Video => synth_video(
            args.frames,
            args.height,
            args.width,
            seed,
            (args.drift_x, args.drift_y),
            args.lo,
            args.hi,
        ),
        SynthKind::Corpus => synth_corpus(args.frames, args.height, args.width, seed, args.lo, args.hi),
    };
    save_sequence(&seq, &args.out, args.bits.depth())?;
    let mut m = RunManifest::new("synth", seed, threads);
    m.flag("frames", args.frames)
        .flag("height", args.height)
        .flag("width", args.width)
        .flag("kind", format!("{:?}", args.kind).to_lowercase())
        .flag("drift_x", args.drift_x)
        .flag("drift_y", args.drift_y)
        .flag("lo", args.lo)
        .flag("hi", args.hi)
        .flag("bits", args.bits.label())
        .output(&args.out);
    m.write(&manifest_path(&args.out, "synth"))?;
    println!("synth: wrote {} frames to {}", seq.len(), args.out);
    Ok(0)
}

pub fn cmd_corrupt(args: &CorruptArgs, seed: u64, threads: usize) -> Result<i32> {
    let schedule = schedule_from_args(&args.noise)?;
    let clean = load_sequence(&args.input)?;
    let noisy = corrupt_sequence(&clean, &schedule, seed)?;
    save_sequence(&noisy, &args.out, args.bits.depth())?;
    let mut m = RunManifest::new("corrupt", seed, threads);
    m.flag("schedule", schedule_label(&schedule))
        .flag("bits", args.bits.label())
        .input(&args.input)
        .output(&args.out);
    m.write(&manifest_path(&args.out, "corrupt"))?;
    println!(
        "corrupt: {} frames, schedule {}",
        noisy.len(),
        schedule_label(&schedule)
    );
    Ok(0)
}

fn load_corpus_dir(dir: &str) -> Result<Vec<(String, Frame)>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir.to_string(), e))?;
    let mut paths: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .map(|x| x.eq_ignore_ascii_case("pgm"))
                .unwrap_or(false)
        })
        .collect();
    paths.sort();
    let mut out = Vec::with_capacity(paths.len());
    for p in paths {
        out.push((p.display().to_string(), read_pgm(&p)?));
    }
    Ok(out)
}

pub fn cmd_pretrain(args: &PretrainArgs, seed: u64, threads: usize) -> Result<i32> {
    let images = load_corpus_dir(&args.corpus)?;
    if images.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let holdout_n = args.holdout.min(images.len().saturating_sub(1));
    let split = images.len() - holdout_n;
    let train = FrameSequence::from_frames(images[..split].iter().map(|(_, f)| f.clone()).collect())?;
    let holdout: Vec<Frame> = images[split..].iter().map(|(_, f)| f.clone()).collect();

    let cfg = PretrainConfig {
        model: args.model.model_config(),
        sigma: args.sigma / 255.0,
        crop_size: args.crop,
        batch: args.batch,
        steps: args.steps,
        lr: args.lr,
    };
    let (params, losses) = pretrain_with_log(&train, &cfg, seed)?;
    save_weights(&params, Path::new(&args.out))?;

    let gain = if holdout.is_empty() {
        f64::NAN
    } else {
        let eval = evaluate_denoiser(&params, &holdout, cfg.sigma, seed)?;
        println!(
            "pretrain: holdout PSNR {:.2} dB noisy -> {:.2} dB denoised (gain {:+.2} dB over {} images)",
            eval.mean_psnr_noisy,
            eval.mean_psnr_denoised,
            eval.gain_db(),
            holdout.len()
        );
        eval.gain_db()
    };
    if let (Some(first), Some(last)) = (losses.first(), losses.last()) {
        println!("pretrain: {} steps, loss {:.5} -> {:.5}", losses.len(), first, last);
    }

    let mut m = RunManifest::new("pretrain", seed, threads);
    m.flag("sigma", args.sigma)
        .flag("steps", args.steps)
        .flag("crop", args.crop)
        .flag("batch", args.batch)
        .flag("lr", args.lr)
        .flag("depth", args.model.depth)
        .flag("width", args.model.width)
        .flag("kernel", args.model.kernel)
        .flag("use_norm", !args.model.no_norm)
        .flag("residual", !args.model.no_residual)
        .flag("holdout", holdout_n)
        .input(&args.corpus)
        .output(&args.out);
    m.write(&manifest_path(&args.out, "pretrain"))?;

    if args.require_gain && !(gain >= args.min_gain) {
        eprintln!(
            "pretrain: holdout gain {gain:.2} dB below required {:.2} dB",
            args.min_gain
        );
        return Ok(1);
    }
    Ok(0)
}

/// Writes `t,psnr_db` rows plus `mean,`/`std,` summary lines; returns the
/// summary.
fn write_eval_csv(psnrs: &[f64], path: &Path) -> Result<(f64, f64)> {
    let rows: Vec<MetricsRow> = psnrs
        .iter()
        .enumerate()
        .map(|(i, &p)| MetricsRow {
            t: i + 1,
            psnr_db: p,
            aux: vec![],
        })
        .collect();
    write_csv(&rows, path)?;
    let (mean, std) = mean_std(psnrs);
    let mut f = std::fs::OpenOptions::new()
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    write!(f, "mean,{mean:.4}\nstd,{std:.4}\n").map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok((mean, std))
}

fn sequence_psnrs(candidate: &FrameSequence, reference: &FrameSequence, context: &'static str) -> Result<Vec<f64>> {
    if candidate.len() != reference.len() {
        return Err(Error::LengthMismatch {
            context,
            a: candidate.len(),
            b: reference.len(),
        });
    }
    (1..=candidate.len())
        .map(|t| psnr(candidate.frame(t), reference.frame(t)))
        .collect()
}

pub fn cmd_finetune(args: &FinetuneArgs, seed: u64, threads: usize) -> Result<i32> {
    let noisy = load_sequence(&args.input)?;
    let params0 = load_weights(Path::new(&args.weights))?;
    let clean = match &args.clean {
        Some(pat) => Some(load_sequence(pat)?),
        None => None,
    };
    let cfg = FinetuneConfig {
        lr: args.lr,
        n_iters: args.iters,
        epochs: args.epochs,
        loss: args.loss.parse::<LossKind>()?,
        symmetric: args.symmetric,
        carry_adam: !args.reset_adam,
        freeze_after: args.freeze_after,
        freeze_norm_stats: args.freeze_norm_stats,
    };
    let flow_cfg = args.flow.flow_config();
    let occ_cfg = args.flow.occ_config();

    let out: FinetuneOutput = match args.mode {
        Mode::Online => finetune_online(&noisy, &params0, &flow_cfg, &occ_cfg, &cfg, clean.as_ref())?,
        Mode::Offline => {
            finetune_offline(&noisy, &params0, &flow_cfg, &occ_cfg, &cfg, seed, clean.as_ref())?
        }
    };

    save_sequence(&out.denoised, &args.out_frames, args.bits.depth())?;
    if let Some(csv) = &args.out_csv {
        write_train_log(&out.log, Path::new(csv))?;
    }
    if let Some(wpath) = &args.out_weights {
        save_weights(&out.params, Path::new(wpath))?;
    }
    if clean.is_some() {
        let vals: Vec<f64> = out.log.iter().filter_map(|r| r.psnr_finetuned).collect();
        let base: Vec<f64> = out.log.iter().filter_map(|r| r.psnr_pretrained).collect();
        let (mean, _) = mean_std(&vals);
        let (bmean, _) = mean_std(&base);
        println!(
            "finetune: mean PSNR {:.2} dB (frame-wise pretrained baseline {:.2} dB)",
            mean, bmean
        );
    }

    let mut m = RunManifest::new("finetune", seed, threads);
    m.flag("mode", format!("{:?}", args.mode).to_lowercase())
        .flag("lr", args.lr)
        .flag("iters", args.iters)
        .flag("epochs", args.epochs)
        .flag("loss", &args.loss)
        .flag("symmetric", args.symmetric)
        .flag("carry_adam", !args.reset_adam)
        .flag(
            "freeze_after",
            args.freeze_after.map(|v| v.to_string()).unwrap_or_else(|| "none".into()),
        )
        .flag("freeze_norm_stats", args.freeze_norm_stats)
        .flag("bits", args.bits.label())
        .input(&args.input)
        .input(&args.weights)
        .output(&args.out_frames);
    args.flow.record(&mut m);
    if let Some(c) = &args.clean {
        m.input(c);
    }
    if let Some(csv) = &args.out_csv {
        m.output(csv);
    }
    if let Some(w) = &args.out_weights {
        m.output(w);
    }
    m.write(&manifest_path(&args.out_frames, "finetune"))?;
    Ok(0)
}

pub fn cmd_denoise(args: &DenoiseArgs, seed: u64, threads: usize) -> Result<i32> {
    let noisy = load_sequence(&args.input)?;
    let params = load_weights(Path::new(&args.weights))?;
    let denoised = denoise_sequence(&params, &noisy)?;
    save_sequence(&denoised, &args.out_frames, args.bits.depth())?;

    if let Some(cleanpat) = &args.clean {
        let clean = load_sequence(cleanpat)?;
        let psnrs = sequence_psnrs(&denoised, &clean, "denoise vs clean")?;
        let (mean, std) = match &args.out_csv {
            Some(csv) => write_eval_csv(&psnrs, Path::new(csv))?,
            None => mean_std(&psnrs),
        };
        println!("denoise: mean PSNR {mean:.4} dB (std {std:.4})");
    }

    let mut m = RunManifest::new("denoise", seed, threads);
    m.flag("bits", args.bits.label())
        .input(&args.input)
        .input(&args.weights)
        .output(&args.out_frames);
    if let Some(c) = &args.clean {
        m.input(c);
    }
    if let Some(csv) = &args.out_csv {
        m.output(csv);
    }
    m.write(&manifest_path(&args.out_frames, "denoise"))?;
    Ok(0)
}

pub fn cmd_flow(args: &FlowArgs, seed: u64, threads: usize) -> Result<i32> {
    let target = read_pgm(Path::new(&args.target))?;
    let reference = read_pgm(Path::new(&args.reference))?;
    let flow_cfg = args.flow.flow_config();
    let flow = tvl1_flow(&target, &reference, &flow_cfg)?;
    write_flo(&flow, Path::new(&args.out))?;
    println!(
        "flow: mean |v| = {:.3} px over {}x{}",
        flow.mean_magnitude(),
        flow.h,
        flow.w
    );
    if let Some(mask_path) = &args.out_mask {
        let pair = build_pair_with_flow(&reference, flow, &args.flow.occ_config())?;
        write_pgm(&pair.mask.to_frame(), Path::new(mask_path), PgmDepth::Eight)?;
        println!("flow: mask fraction {:.3}", pair.mask.fraction());
    }

    let mut m = RunManifest::new("flow", seed, threads);
    m.input(&args.target).input(&args.reference).output(&args.out);
    args.flow.record(&mut m);
    if let Some(mp) = &args.out_mask {
        m.output(mp);
    }
    m.write(&manifest_path(&args.out, "flow"))?;
    Ok(0)
}

pub fn cmd_eval(args: &EvalArgs, seed: u64, threads: usize) -> Result<i32> {
    let candidate = load_sequence(&args.input)?;
    let reference = load_sequence(&args.reference)?;
    let psnrs = sequence_psnrs(&candidate, &reference, "eval sequences")?;
    let (mean, std) = write_eval_csv(&psnrs, Path::new(&args.out_csv))?;
    println!("eval: {} frames, mean PSNR {mean:.4} dB, std {std:.4}", psnrs.len());

    let mut m = RunManifest::new("eval", seed, threads);
    m.input(&args.input).input(&args.reference).output(&args.out_csv);
    m.write(&manifest_path(&args.out_csv, "eval"))?;
    Ok(0)
}
