//! Argument definitions.

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "f2f",
    version,
    about = "Model-blind video denoising: fine-tunes a small residual CNN on a single noisy video using motion-compensated noise-to-noise training",
    propagate_version = true
)]
pub struct Cli {
    /// Master seed; falls back to the F2F_SEED environment variable, then 0.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads (0 = all available cores). Use 1 for bit-exact
    /// reproducibility guarantees; results agree across thread counts
    /// anyway because all parallel work writes disjoint regions.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate synthetic clean frames (a drifting textured video or an
    /// image corpus) so the pipeline can run without external data.
    Synth(SynthArgs),
    /// Corrupt a clean sequence with a noise spec or schedule.
    Corrupt(CorruptArgs),
    /// Pretrain a denoiser on AWGN over a clean image corpus.
    Pretrain(PretrainArgs),
    /// Fine-tune pretrained weights on a single noisy video (online or
    /// offline) and write the denoised frames.
    Finetune(FinetuneArgs),
    /// Frame-wise denoising with fixed weights.
    Denoise(DenoiseArgs),
    /// Estimate optical flow between two frames; dump .flo and the
    /// occlusion mask.
    Flow(FlowArgs),
    /// Per-frame PSNR of a sequence against a reference sequence.
    Eval(EvalArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Bits {
    #[value(name = "8")]
    Eight,
    #[value(name = "16")]
    Sixteen,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SynthKind {
    Video,
    Corpus,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Output pattern with %d or %0Nd, e.g. data/clean_%03d.pgm
    #[arg(long)]
    pub out: String,
    /// Number of frames (video) or images (corpus).
    #[arg(long, default_value_t = 40)]
    pub frames: usize,
    #[arg(long, default_value_t = 64)]
    pub height: usize,
    #[arg(long, default_value_t = 96)]
    pub width: usize,
    #[arg(long, value_enum, default_value_t = SynthKind::Video)]
    pub kind: SynthKind,
    /// Background drift in pixels per frame (video only).
    #[arg(long, default_value_t = 0.5)]
    pub drift_x: f32,
    #[arg(long, default_value_t = 0.25)]
    pub drift_y: f32,
    /// Intensity range of the generated frames.
    #[arg(long, default_value_t = 0.05)]
    pub lo: f32,
    #[arg(long, default_value_t = 0.95)]
    pub hi: f32,
    #[arg(long, value_enum, default_value_t = Bits::Eight)]
    pub bits: Bits,
}

#[derive(Args, Debug)]
pub struct NoiseArgs {
    /// Noise kind: awgn | mult | correlated | salt_pepper | jpeg_awgn |
    /// ramp | switch. Alternatively use --schedule / --schedule-file.
    #[arg(long)]
    pub noise: Option<String>,
    /// Gaussian sigma in 8-bit units (25 means 25/255).
    #[arg(long)]
    pub sigma: Option<f32>,
    /// Replacement probability for salt_pepper.
    #[arg(long)]
    pub p: Option<f32>,
    /// JPEG quality factor in [1,100].
    #[arg(long)]
    pub quality: Option<u32>,
    /// Disk kernel radius for correlated noise.
    #[arg(long)]
    pub radius: Option<f32>,
    /// Sub-spec for ramp/switch, e.g. "kind=awgn sigma=50".
    #[arg(long)]
    pub spec_a: Option<String>,
    #[arg(long)]
    pub spec_b: Option<String>,
    /// Switch frame (switch mode).
    #[arg(long)]
    pub at: Option<usize>,
    /// Ramp frame range (ramp mode).
    #[arg(long)]
    pub from: Option<usize>,
    #[arg(long)]
    pub to: Option<usize>,
    /// Full schedule in the key=value text format.
    #[arg(long, conflicts_with = "noise")]
    pub schedule: Option<String>,
    /// File containing the schedule text.
    #[arg(long, conflicts_with_all = ["noise", "schedule"])]
    pub schedule_file: Option<String>,
}

#[derive(Args, Debug)]
pub struct CorruptArgs {
    /// Input clean pattern (PGM, 1-based %d).
    #[arg(long = "in")]
    pub input: String,
    /// Output noisy pattern.
    #[arg(long)]
    pub out: String,
    #[command(flatten)]
    pub noise: NoiseArgs,
    /// Output sample depth; 16 preserves more of the unclipped noise.
    #[arg(long, value_enum, default_value_t = Bits::Sixteen)]
    pub bits: Bits,
}

#[derive(Args, Debug)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 7)]
    pub depth: usize,
    #[arg(long, default_value_t = 32)]
    pub width: usize,
    #[arg(long, default_value_t = 3)]
    pub kernel: usize,
    /// Disable batch normalization in the middle layers.
    #[arg(long)]
    pub no_norm: bool,
    /// Predict the clean image directly instead of the residual.
    #[arg(long)]
    pub no_residual: bool,
}

#[derive(Args, Debug)]
pub struct PretrainArgs {
    /// Directory of clean PGM images (uniform dimensions).
    #[arg(long)]
    pub corpus: String,
    /// Output weights file.
    #[arg(long)]
    pub out: String,
    /// AWGN sigma in 8-bit units.
    #[arg(long, default_value_t = 25.0)]
    pub sigma: f32,
    #[arg(long, default_value_t = 2000)]
    pub steps: usize,
    #[arg(long, default_value_t = 48)]
    pub crop: usize,
    #[arg(long, default_value_t = 16)]
    pub batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f32,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Images held out of training for the gain gate.
    #[arg(long, default_value_t = 2)]
    pub holdout: usize,
    /// Exit nonzero unless the held-out PSNR gain reaches --min-gain.
    #[arg(long)]
    pub require_gain: bool,
    #[arg(long, default_value_t = 3.0)]
    pub min_gain: f64,
}

#[derive(Args, Debug)]
pub struct FlowOptArgs {
    /// Data attachment weight of the TV-L1 energy.
    #[arg(long, default_value_t = 0.3)]
    pub flow_lambda: f32,
    #[arg(long, default_value_t = 5)]
    pub flow_warps: usize,
    #[arg(long, default_value_t = 50)]
    pub flow_iters: usize,
    /// Coarsening factor applied to the pair before solving.
    #[arg(long, default_value_t = 2)]
    pub flow_downscale: usize,
    /// Pyramid levels (0 = auto).
    #[arg(long, default_value_t = 0)]
    pub flow_scales: usize,
    /// Disable 3x3 median filtering of the flow.
    #[arg(long)]
    pub no_median: bool,
    /// Occlusion threshold on |div v|.
    #[arg(long, default_value_t = 0.5)]
    pub tau_div: f32,
    /// Chebyshev dilation radius of the occluded region.
    #[arg(long, default_value_t = 1)]
    pub dilation: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Mode {
    Online,
    Offline,
}

#[derive(Args, Debug)]
pub struct FinetuneArgs {
    /// Noisy input pattern.
    #[arg(long = "in")]
    pub input: String,
    /// Pretrained weights file.
    #[arg(long)]
    pub weights: String,
    #[arg(long, value_enum, default_value_t = Mode::Online)]
    pub mode: Mode,
    #[arg(long, default_value_t = 5e-5)]
    pub lr: f32,
    /// Adam steps per frame (online).
    #[arg(long, default_value_t = 20)]
    pub iters: usize,
    /// Passes over all pairs (offline).
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    /// l1 or l2.
    #[arg(long, default_value = "l1")]
    pub loss: String,
    /// Also train against the forward-warped next frame.
    #[arg(long)]
    pub symmetric: bool,
    /// Stop updating after this frame (online).
    #[arg(long)]
    pub freeze_after: Option<usize>,
    /// Reset Adam moments at every frame instead of carrying them.
    #[arg(long)]
    pub reset_adam: bool,
    /// Keep batch-norm running statistics fixed while fine-tuning.
    #[arg(long)]
    pub freeze_norm_stats: bool,
    /// Clean reference pattern; adds PSNR columns to the CSV.
    #[arg(long)]
    pub clean: Option<String>,
    #[arg(long)]
    pub out_frames: String,
    #[arg(long)]
    pub out_csv: Option<String>,
    #[arg(long)]
    pub out_weights: Option<String>,
    #[arg(long, value_enum, default_value_t = Bits::Eight)]
    pub bits: Bits,
    #[command(flatten)]
    pub flow: FlowOptArgs,
}

#[derive(Args, Debug)]
pub struct DenoiseArgs {
    #[arg(long = "in")]
    pub input: String,
    #[arg(long)]
    pub weights: String,
    #[arg(long)]
    pub out_frames: String,
    /// Clean reference pattern; writes a PSNR CSV when given.
    #[arg(long)]
    pub clean: Option<String>,
    #[arg(long)]
    pub out_csv: Option<String>,
    #[arg(long, value_enum, default_value_t = Bits::Eight)]
    pub bits: Bits,
}

#[derive(Args, Debug)]
pub struct FlowArgs {
    /// Target frame (flow maps target pixels into the reference).
    #[arg(long)]
    pub target: String,
    /// Reference frame.
    #[arg(long)]
    pub reference: String,
    /// Output .flo path.
    #[arg(long)]
    pub out: String,
    /// Occlusion mask PGM (0 = occluded, 255 = visible).
    #[arg(long)]
    pub out_mask: Option<String>,
    #[command(flatten)]
    pub flow: FlowOptArgs,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Candidate pattern.
    #[arg(long = "in")]
    pub input: String,
    /// Reference pattern.
    #[arg(long = "ref")]
    pub reference: String,
    #[arg(long)]
    pub out_csv: String,
}
