mod commands;
mod config;
mod logging;
mod staging;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use inplace_aug::augmentor::{ClassOrder, OverlapMode};
use inplace_aug::report::Format;
use inplace_aug::roi::RoiMode;
use log::LevelFilter;
use serde_json::json;

use config::{DatasetFormat, RunConfig, VariantSource, RESOLVED_CONFIG};
use staging::Staging;

/// In-place copy-paste augmentation for stationary-camera detection datasets.
#[derive(Parser, Debug)]
#[command(name = "inplace-aug", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// JSON run configuration; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output folder, replaced atomically on success.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    /// Worker threads (0 = automatic). Defaults to $INPLACE_AUG_WORKERS.
    #[arg(short = 'j', long, global = true)]
    workers: Option<usize>,
    /// COCO JSON file or YOLO label folder.
    #[arg(long, global = true)]
    annotations: Option<PathBuf>,
    /// Image root folder.
    #[arg(long, global = true)]
    images: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<DatasetFormat>,
    /// YOLO class names, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    classes: Option<Vec<String>>,
    /// Regex whose first capture group, applied to the file name, is the camera id.
    #[arg(long, global = true)]
    camera_pattern: Option<String>,
    /// Mean luminance at or above which a frame counts as day.
    #[arg(long, global = true)]
    lighting_threshold: Option<f64>,
    /// CSV of `image_id,Day|Night` or `camera:<id>,Day|Night` lines.
    #[arg(long, global = true)]
    lighting_overrides: Option<PathBuf>,
    #[arg(long, global = true, default_value = "info")]
    log_level: LevelFilter,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse and check a dataset and its image files.
    Validate,
    /// Tag cameras and lighting, then summarize the candidate index.
    Index,
    /// Pick a small subset whose class/size profile tracks the full set.
    Sample(SampleArgs),
    /// Paste same-camera objects at their original positions.
    Augment(AugmentArgs),
    /// Augment with a separate multiplier per class.
    Assemble(AssembleArgs),
    /// Blur everything outside each camera's active region.
    Blur(BlurArgs),
    /// Per-class count tables and size histograms.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[arg(long)]
    fraction: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_iters: Option<usize>,
}

#[derive(Args, Debug)]
struct PlacementArgs {
    #[arg(long)]
    seed: Option<u64>,
    /// Skip decoding and writing pixels; annotations and logs only.
    #[arg(long)]
    no_images: bool,
    /// Allow candidates whose lighting differs from the host frame.
    #[arg(long)]
    no_lighting_match: bool,
    /// Accept candidates whose IoU with every box is at most this value.
    #[arg(long)]
    iou_threshold: Option<f64>,
    /// Let a frame receive objects from itself.
    #[arg(long)]
    allow_same_frame: bool,
    /// Visit classes in a seeded random order instead of by id.
    #[arg(long)]
    shuffle_class_order: bool,
}

#[derive(Args, Debug)]
struct AugmentArgs {
    /// Per-image, per-class cap on pasted objects.
    #[arg(short = 'k', long)]
    multiplier: Option<u32>,
    /// Cap for one class, as NAME=K. Repeatable.
    #[arg(long = "class-multiplier", value_name = "NAME=K")]
    class_multipliers: Vec<String>,
    #[command(flatten)]
    placement: PlacementArgs,
}

#[derive(Args, Debug)]
struct AssembleArgs {
    /// Multiplier for one class, as NAME=K with K in {0, 3, 10, 20}. Repeatable.
    #[arg(long = "variant", value_name = "NAME=K")]
    variants: Vec<String>,
    #[command(flatten)]
    placement: PlacementArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RoiModeArg {
    Hull,
    Union,
}

#[derive(Args, Debug)]
struct BlurArgs {
    #[arg(long, value_enum)]
    roi_mode: Option<RoiModeArg>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    dilation: Option<u32>,
    /// Reuse an existing rois.json.
    #[arg(long)]
    rois: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// A COCO variant column, as NAME=PATH. Repeatable; appended after the
    /// configured variants.
    #[arg(long = "variant", value_name = "NAME=PATH")]
    variants: Vec<String>,
    /// markdown, csv or json.
    #[arg(long, value_parser = |s: &str| s.parse::<Format>())]
    report_format: Option<Format>,
    /// Also print the count table to standard output.
    #[arg(long)]
    stdout: bool,
}

fn split_pair(s: &str) -> Result<(&str, &str)> {
    match s.rsplit_once('=') {
        Some((k, v)) if !k.is_empty() && !v.is_empty() => Ok((k, v)),
        _ => bail!("expected NAME=VALUE, got {s:?}"),
    }
}

fn apply_placement_flags(cfg: &mut RunConfig, p: &PlacementArgs) {
    let a = &mut cfg.augment;
    if p.seed.is_some() {
        a.seed = p.seed;
    }
    if p.no_images {
        a.write_images = false;
    }
    if p.no_lighting_match {
        a.lighting_match = false;
    }
    if let Some(tau) = p.iou_threshold {
        a.overlap = OverlapMode::IouThreshold { tau };
    }
    if p.allow_same_frame {
        a.exclude_same_frame = false;
    }
    if p.shuffle_class_order {
        a.class_order = ClassOrder::BySeedShuffle;
    }
}

/// Layers flags over the config file (or defaults).
fn resolve(cli: &Cli) -> Result<RunConfig> {
    let c = &cli.common;
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if c.output.is_some() {
        cfg.output = c.output.clone();
    }
    if c.workers.is_some() {
        cfg.workers = c.workers;
    }
    if c.annotations.is_some() {
        cfg.dataset.annotations = c.annotations.clone();
    }
    if c.images.is_some() {
        cfg.dataset.images = c.images.clone();
    }
    if let Some(f) = c.format {
        cfg.dataset.format = f;
    }
    if c.classes.is_some() {
        cfg.dataset.classes = c.classes.clone();
    }
    if let Some(p) = &c.camera_pattern {
        cfg.tagging.camera_pattern = p.clone();
    }
    if let Some(t) = c.lighting_threshold {
        cfg.tagging.lighting_threshold = t;
    }
    if c.lighting_overrides.is_some() {
        cfg.tagging.lighting_overrides = c.lighting_overrides.clone();
    }
    match &cli.command {
        Command::Validate | Command::Index => {}
        Command::Sample(a) => {
            if let Some(f) = a.fraction {
                cfg.sample.fraction = f;
            }
            if a.seed.is_some() {
                cfg.sample.seed = a.seed;
            }
            if let Some(m) = a.max_iters {
                cfg.sample.max_iters = m;
            }
        }
        Command::Augment(a) => {
            if let Some(k) = a.multiplier {
                cfg.augment.multiplier = k;
            }
            for pair in &a.class_multipliers {
                let (name, k) = split_pair(pair)?;
                let k = k
                    .parse()
                    .with_context(|| format!("--class-multiplier {pair}"))?;
                cfg.augment.multipliers.insert(name.into(), k);
            }
            apply_placement_flags(&mut cfg, &a.placement);
        }
        Command::Assemble(a) => {
            for pair in &a.variants {
                let (name, k) = split_pair(pair)?;
                let k = k.parse().with_context(|| format!("--variant {pair}"))?;
                cfg.assemble.variant.insert(name.into(), k);
            }
            apply_placement_flags(&mut cfg, &a.placement);
        }
        Command::Blur(a) => {
            if let Some(m) = a.roi_mode {
                cfg.roi.mode = match m {
                    RoiModeArg::Hull => RoiMode::ConvexHull,
                    RoiModeArg::Union => RoiMode::BoxUnion,
                };
            }
            if let Some(s) = a.sigma {
                cfg.roi.sigma = s;
            }
            if let Some(d) = a.dilation {
                cfg.roi.dilation = d;
            }
            if a.rois.is_some() {
                cfg.roi.rois = a.rois.clone();
            }
        }
        Command::Report(a) => {
            for pair in &a.variants {
                let (name, path) = split_pair(pair)?;
                cfg.report.variants.push(VariantSource {
                    name: name.into(),
                    annotations: path.into(),
                    format: DatasetFormat::Coco,
                    images: None,
                    classes: None,
                });
            }
            if let Some(f) = a.report_format {
                cfg.report.format = f;
            }
        }
    }
    cfg.materialize_seeds();
    cfg.resolve_workers()?;
    cfg.absolutize()?;
    match &cli.command {
        Command::Report(_) => {
            for v in &cfg.report.variants {
                config::must_exist(&v.annotations, &format!("report variant {:?}", v.name))?;
            }
        }
        _ => cfg.check_dataset_paths()?,
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = resolve(cli).context("invalid configuration")?;
    let stage = Staging::new(cfg.output_dir()?)?;
    let name = match &cli.command {
        Command::Validate => {
            commands::validate(&cfg, &stage)?;
            "validate"
        }
        Command::Index => {
            commands::index(&cfg, &stage)?;
            "index"
        }
        Command::Sample(_) => {
            commands::sample(&cfg, &stage)?;
            "sample"
        }
        Command::Augment(_) => {
            commands::augment(&cfg, &stage)?;
            "augment"
        }
        Command::Assemble(_) => {
            commands::assemble_cmd(&cfg, &stage)?;
            "assemble"
        }
        Command::Blur(_) => {
            commands::blur(&cfg, &stage)?;
            "blur"
        }
        Command::Report(a) => {
            commands::report(&cfg, &stage, a.stdout)?;
            "report"
        }
    };
    stage.write(RESOLVED_CONFIG, cfg.to_json())?;
    let out = stage.commit()?;
    log::info!("{name} finished, outputs in {}", out.display());
    Ok(())
}

fn error_kind(err: &anyhow::Error) -> &'static str {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<inplace_aug::Error>() {
            return e.kind();
        }
        if cause.is::<serde_json::Error>() {
            return "config";
        }
        if cause.is::<std::io::Error>() {
            return "io";
        }
    }
    "cli"
}

fn report_error(kind: &str, message: String, causes: Vec<String>) {
    let line = json!({
        "level": "error",
        "error": {"kind": kind, "message": message, "causes": causes},
    });
    eprintln!("{line}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => match e.kind() {
            ErrorKind::DisplayHelp
            | ErrorKind::DisplayVersion
            | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => e.exit(),
            _ => {
                report_error("usage", e.to_string().trim().to_string(), Vec::new());
                return ExitCode::from(2);
            }
        },
    };
    logging::init(cli.common.log_level);
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let causes = err.chain().skip(1).map(|c| c.to_string()).collect();
            report_error(error_kind(&err), err.to_string(), causes);
            ExitCode::FAILURE
        }
    }
}
