mod config;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};
use vesseltrack::eval::{aggregate, evaluate_frames, metrics_table, FrameRow};
use vesseltrack::io::{
    annotation_name, field_name, frame_name, load_annotations, load_frame, load_mask, load_sequence, render_overlay,
    sequence_frames, write_sequence,
};
use vesseltrack::preprocess::DeformationField;
use vesseltrack::synth::{gen_tree, render_sequence, SynthParams};
use vesseltrack::{track_sequence_with, TrackOptions, VesselAnnotation};

use crate::config::{load_config, RunConfig};

#[derive(Parser)]
#[command(name = "vesseltrack", version, about = "Track annotated vessel centerlines through image sequences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic sequence with ground-truth annotations.
    Synth(SynthArgs),
    /// Track a frame-0 annotation through a sequence.
    Track(TrackArgs),
    /// Score tracked annotations against ground truth.
    Eval(EvalArgs),
    /// Draw tracked (and optionally ground-truth) centerlines onto the frames.
    RenderOverlay(OverlayArgs),
}

#[derive(Args)]
struct Shared {
    /// Run configuration file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    shared: Shared,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    amplitude: Option<f64>,
    #[arg(long)]
    branches: Option<usize>,
    #[arg(long)]
    depth: Option<usize>,
}

#[derive(Args)]
struct TrackArgs {
    #[command(flatten)]
    shared: Shared,
    /// Sequence directory of numbered 8-bit frames.
    #[arg(long)]
    seq: Option<PathBuf>,
    /// Annotation of the first tracked frame.
    #[arg(long)]
    ann: Option<PathBuf>,
    /// Tracking-range radius in pixels.
    #[arg(long)]
    sigma: Option<f64>,
    /// Nearest segments per guided endpoint.
    #[arg(long)]
    n: Option<usize>,
    /// Frames advanced per tracking step.
    #[arg(long)]
    stride: Option<usize>,
    /// Output the per-branch selections without fusing them.
    #[arg(long)]
    no_fusion: bool,
    /// Directory of precomputed deformation fields replacing registration.
    #[arg(long)]
    field_dir: Option<PathBuf>,
    /// Directory of segmentation masks named like the frames.
    #[arg(long)]
    mask_dir: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    shared: Shared,
    #[arg(long)]
    pred: Option<PathBuf>,
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Tolerance in pixels.
    #[arg(long)]
    rho: Option<f64>,
}

#[derive(Args)]
struct OverlayArgs {
    #[command(flatten)]
    shared: Shared,
    #[arg(long)]
    seq: Option<PathBuf>,
    #[arg(long)]
    pred: Option<PathBuf>,
    #[arg(long)]
    gt: Option<PathBuf>,
}

fn file_config(shared: &Shared) -> Result<RunConfig> {
    match &shared.config {
        Some(p) => load_config(p),
        None => Ok(RunConfig::default()),
    }
}

fn required(flag: Option<PathBuf>, file: Option<PathBuf>, name: &str) -> Result<PathBuf> {
    flag.or(file).with_context(|| format!("missing --{name}"))
}

fn existing_dir(p: &Path, what: &str) -> Result<()> {
    ensure!(p.is_dir(), "{what} directory {} not found", p.display());
    Ok(())
}

fn create_out(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).with_context(|| format!("cannot create output directory {}", p.display()))
}

fn synth(args: SynthArgs) -> Result<()> {
    let file = file_config(&args.shared)?;
    let out = required(args.shared.out, file.out, "out")?;
    let base = file.synth.unwrap_or_default();
    let params = SynthParams {
        seed: args.seed.unwrap_or(base.seed),
        frames: args.frames.unwrap_or(base.frames),
        width: args.width.unwrap_or(base.width),
        height: args.height.unwrap_or(base.height),
        noise: args.noise.unwrap_or(base.noise),
        amplitude: args.amplitude.unwrap_or(base.amplitude),
        branches: args.branches.unwrap_or(base.branches),
        depth: args.depth.unwrap_or(base.depth),
        ..base
    };
    params.validate()?;
    create_out(&out)?;
    let tree = gen_tree(&params)?;
    let (frames, truth) = render_sequence(&tree, &params);
    write_sequence(&out, &frames, &truth, Some(&params))?;
    log::info!("wrote {} frames to {}", frames.len(), out.display());
    Ok(())
}

fn track(args: TrackArgs) -> Result<()> {
    let file = file_config(&args.shared)?;
    let seq = required(args.seq, file.seq, "seq")?;
    let ann = required(args.ann, file.ann, "ann")?;
    let out = required(args.shared.out, file.out, "out")?;
    let field_dir = args.field_dir.or(file.field_dir);
    let mask_dir = args.mask_dir.or(file.mask_dir);
    let mut cfg = file.tracker;
    if let Some(s) = args.sigma {
        cfg.sigma = s;
    }
    if let Some(n) = args.n {
        cfg.n_nearest = n;
    }
    if args.no_fusion {
        cfg.fusion = false;
    }
    cfg.validate()?;
    let stride = args.stride.or(file.stride).unwrap_or(1);
    ensure!(stride >= 1, "stride must be >= 1");

    existing_dir(&seq, "sequence")?;
    ensure!(ann.is_file(), "annotation {} not found", ann.display());
    for d in field_dir.iter().chain(&mask_dir) {
        existing_dir(d, "input")?;
    }
    let initial = VesselAnnotation::load(&ann).with_context(|| format!("annotation {}", ann.display()))?;
    let paths = sequence_frames(&seq)?;
    let start = initial.frame_index;
    ensure!(
        start + 1 < paths.len(),
        "annotation is for frame {start} but the sequence has {} frames",
        paths.len()
    );
    let frames = paths[start..]
        .iter()
        .map(|p| load_frame(p).with_context(|| format!("frame {}", p.display())))
        .collect::<Result<Vec<_>>>()?;

    let mut opts = TrackOptions {
        stride,
        ..Default::default()
    };
    for k in (stride..frames.len()).step_by(stride) {
        if let Some(dir) = &field_dir {
            let p = dir.join(field_name(start + k));
            if p.is_file() {
                let f = DeformationField::load(&p).with_context(|| format!("field {}", p.display()))?;
                opts.fields.insert(k, f);
            }
        }
        if let Some(dir) = &mask_dir {
            let p = dir.join(frame_name(start + k));
            if p.is_file() {
                opts.masks.insert(k, load_mask(&p).with_context(|| format!("mask {}", p.display()))?);
            }
        }
    }
    create_out(&out)?;

    let initial = VesselAnnotation {
        frame_index: 0,
        ..initial
    };
    let report = track_sequence_with(&frames, &initial, &cfg, &opts)?;
    for f in &report.frames {
        let a = VesselAnnotation {
            frame_index: start + f.annotation.frame_index,
            branches: f.annotation.branches.clone(),
        };
        a.save(&out.join(annotation_name(a.frame_index)))?;
    }
    std::fs::write(out.join("report.csv"), report.summary())?;
    std::fs::write(out.join("timings.csv"), report.timings_text())?;
    if report.fallback_count() > 0 {
        log::warn!("{} branch fallbacks, see report.csv", report.fallback_count());
    }
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let file = file_config(&args.shared)?;
    let pred_dir = required(args.pred, file.pred, "pred")?;
    let gt_dir = required(args.gt, file.gt, "gt")?;
    let rho = args.rho.unwrap_or(file.tracker.rho);
    ensure!(rho >= 0.0, "rho must be >= 0");
    existing_dir(&pred_dir, "prediction")?;
    existing_dir(&gt_dir, "ground-truth")?;
    let pred = load_annotations(&pred_dir)?;
    let gt = load_annotations(&gt_dir)?;
    ensure!(!pred.is_empty(), "no annotations in {}", pred_dir.display());
    let refs: Vec<&VesselAnnotation> = pred.iter().collect();
    let per_frame = evaluate_frames(&refs, &gt, rho)?;
    let name = pred_dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "sequence".into());
    let rows: Vec<FrameRow> = per_frame
        .iter()
        .map(|&(frame, metrics)| FrameRow {
            sequence: name.clone(),
            frame,
            metrics,
        })
        .collect();
    let summary = aggregate(&[per_frame.iter().map(|(_, m)| *m).collect()])?;
    let table = metrics_table(&rows, &summary);
    match args.shared.out.or(file.out) {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                create_out(parent)?;
            }
            std::fs::write(&p, table)?
        }
        None => print!("{table}"),
    }
    Ok(())
}

fn overlay(args: OverlayArgs) -> Result<()> {
    let file = file_config(&args.shared)?;
    let seq = required(args.seq, file.seq, "seq")?;
    let pred_dir = required(args.pred, file.pred, "pred")?;
    let out = required(args.shared.out, file.out, "out")?;
    let gt_dir = args.gt.or(file.gt);
    existing_dir(&seq, "sequence")?;
    existing_dir(&pred_dir, "prediction")?;
    if let Some(d) = &gt_dir {
        existing_dir(d, "ground-truth")?;
    }
    let frames = load_sequence(&seq)?;
    let pred = load_annotations(&pred_dir)?;
    let gt: BTreeMap<usize, VesselAnnotation> = match &gt_dir {
        Some(d) => load_annotations(d)?.into_iter().map(|a| (a.frame_index, a)).collect(),
        None => BTreeMap::new(),
    };
    create_out(&out)?;
    for a in &pred {
        let Some(frame) = frames.get(a.frame_index) else {
            bail!("annotation for frame {} has no matching frame", a.frame_index);
        };
        let img = render_overlay(frame, a, gt.get(&a.frame_index));
        img.save(out.join(format!("overlay{:03}.png", a.frame_index)))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Track(a) => track(a),
        Command::Eval(a) => eval(a),
        Command::RenderOverlay(a) => overlay(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
