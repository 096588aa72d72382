// Scratch calibration for the acceptance experiments, run manually.

use f2f_core::flow::FlowConfig;
use f2f_core::metrics::mean_std;
use f2f_core::model::{init_params, ModelConfig};
use f2f_core::noise::{NoiseSchedule, NoiseSpec};
use f2f_core::synth::{synth_corpus, synth_video};
use f2f_core::train::*;
use f2f_core::warp::OcclusionConfig;
use std::time::Instant;

fn psnr_window(log: &[FrameLog], lo: usize, hi: usize) -> f64 {
    let vals: Vec<f64> = log
        .iter()
        .filter(|r| r.t >= lo && r.t <= hi)
        .map(|r| r.psnr_finetuned.unwrap())
        .collect();
    mean_std(&vals).0
}

fn pretrained_window(log: &[FrameLog], lo: usize, hi: usize) -> f64 {
    let vals: Vec<f64> = log
        .iter()
        .filter(|r| r.t >= lo && r.t <= hi)
        .map(|r| r.psnr_pretrained.unwrap())
        .collect();
    mean_std(&vals).0
}

#[test]
#[ignore]
fn calibrate_acceptance_runs() {
    let t_all = Instant::now();
    let corpus = synth_corpus(12, 96, 128, 2024, 0.1, 0.9);
    let holdout: Vec<_> = corpus.frames()[10..].to_vec();
    let train =
        f2f_core::frame::FrameSequence::from_frames(corpus.frames()[..10].to_vec()).unwrap();

    let pre_cfg = PretrainConfig {
        model: ModelConfig::default(),
        sigma: 25.0 / 255.0,
        crop_size: 40,
        batch: 8,
        steps: 400,
        lr: 1e-3,
    };
    let t0 = Instant::now();
    let (params0, losses) = pretrain_with_log(&train, &pre_cfg, 7).unwrap();
    let eval = evaluate_denoiser(&params0, &holdout, 25.0 / 255.0, 99).unwrap();
    eprintln!(
        "pretrain 400 steps: {:.0}s, first100 loss {:.5}, last100 {:.5}, holdout gain {:.2} dB ({:.2} -> {:.2})",
        t0.elapsed().as_secs_f64(),
        losses[..100].iter().sum::<f64>() / 100.0,
        losses[300..].iter().sum::<f64>() / 100.0,
        eval.gain_db(),
        eval.mean_psnr_noisy,
        eval.mean_psnr_denoised,
    );

    let flow_cfg = FlowConfig::default();
    let occ_cfg = OcclusionConfig::default();
    let ft = FinetuneConfig::default();

    // --- C5 matched noise ---
    let clean = synth_video(40, 64, 96, 515, (0.5, 0.25), 0.15, 0.85);
    let noisy = corrupt_sequence(
        &clean,
        &NoiseSchedule::Constant(NoiseSpec::Awgn { sigma: 25.0 / 255.0 }),
        31,
    )
    .unwrap();
    let t0 = Instant::now();
    let out = finetune_online(&noisy, &params0, &flow_cfg, &occ_cfg, &ft, Some(&clean)).unwrap();
    let ft_mean = psnr_window(&out.log, 31, 40);
    let frozen_mean = pretrained_window(&out.log, 31, 40);
    eprintln!(
        "C5 matched awgn25 ({:.0}s): finetuned {:.2} dB vs frozen {:.2} dB (delta {:+.2})",
        t0.elapsed().as_secs_f64(),
        ft_mean,
        frozen_mean,
        ft_mean - frozen_mean
    );

    // --- C6 salt & pepper ---
    let sp = NoiseSchedule::Constant(NoiseSpec::SaltPepper { p: 0.25 });
    for seed in [41u64, 42, 43] {
        let noisy = corrupt_sequence(&clean, &sp, seed).unwrap();
        let t0 = Instant::now();
        let on = finetune_online(&noisy, &params0, &flow_cfg, &occ_cfg, &ft, Some(&clean)).unwrap();
        let off =
            finetune_offline(&noisy, &params0, &flow_cfg, &occ_cfg, &ft, seed, Some(&clean)).unwrap();
        let on_vals: Vec<f64> = on.log[29..40].iter().map(|r| r.psnr_finetuned.unwrap()).collect();
        let off_vals: Vec<f64> = off.log[29..40].iter().map(|r| r.psnr_finetuned.unwrap()).collect();
        let (on_m, on_s) = mean_std(&on_vals);
        let (off_m, off_s) = mean_std(&off_vals);
        eprintln!(
            "C6 sp seed {seed} ({:.0}s): frozen {:.2} online {:.2} (std {:.2}) offline {:.2} (std {:.2})",
            t0.elapsed().as_secs_f64(),
            pretrained_window(&on.log, 30, 40),
            on_m,
            on_s,
            off_m,
            off_s
        );
    }

    // --- C7 random init vs pretrained ---
    let noisy = corrupt_sequence(&clean, &sp, 41).unwrap();
    let rand0 = init_params(ModelConfig::default(), 7).unwrap();
    let t0 = Instant::now();
    let rnd = finetune_online(&noisy, &rand0, &flow_cfg, &occ_cfg, &ft, Some(&clean)).unwrap();
    eprintln!(
        "C7 random-init online ({:.0}s): {:.2} dB over frames 30-40",
        t0.elapsed().as_secs_f64(),
        psnr_window(&rnd.log, 30, 40)
    );

    // --- C8 lifelong switch ---
    let clean60 = synth_video(60, 64, 96, 616, (0.5, 0.25), 0.15, 0.85);
    let schedule = NoiseSchedule::Switch {
        a: NoiseSpec::Awgn { sigma: 50.0 / 255.0 },
        b: NoiseSpec::SaltPepper { p: 0.25 },
        t_switch: 31,
    };
    let t0 = Instant::now();
    let life = run_lifelong(&clean60, &schedule, &params0, &flow_cfg, &occ_cfg, &ft, 88).unwrap();
    let pre_mean = psnr_window(&life.output.log, 10, 30);
    let post: Vec<f64> = life.output.log[31..41]
        .iter()
        .map(|r| r.psnr_finetuned.unwrap())
        .collect();
    eprintln!(
        "C8 switch ({:.0}s): pre-switch mean {:.2}, post-switch next 10: {:?}",
        t0.elapsed().as_secs_f64(),
        pre_mean,
        post.iter().map(|v| (v * 10.0).round() / 10.0).collect::<Vec<_>>()
    );
    eprintln!("total {:.0}s", t_all.elapsed().as_secs_f64());
}
